//! Pointwise residuals of the collar metric `g₀ = h/ρ²` and its conformal chart.

use std::f64::consts::{LN_2, PI};
use std::io::Write;
use std::path::Path;

use super::background::FermiBackground;
use super::series::{LogPowerSeries, LogSeries};
use crate::geometry::io::format_float;
use crate::geometry::{ConformalChart, MetricState, Topology, WarpChart};
use crate::numeric::{fit_line, hermite_eval, pairwise_sum, LineFit};
use crate::{Error, Result};

/// Default sampling window for the order fit.
pub const DEFAULT_R_WINDOW: (f64, f64) = (1e-3, 1e-1);
/// Residuals below this are indistinguishable from rounding.
pub const RESIDUAL_FLOOR: f64 = 1e-14;
/// Samples of the residual profile used by [`residual_order_check`].
pub const RESIDUAL_SAMPLES: usize = 41;
const THETA_SAMPLES: usize = 32;

/// Evaluates `ρ = rη`, its derivatives and `K₀ + 1` at points of the collar.
///
/// Derivatives are taken term by term on the truncated series, and `ρ_r − 1`
/// is summed without its leading 1, so the residual is accurate to about
/// `ε·r` rather than `ε`. Difference quotients cannot resolve residuals of
/// order `r⁷` at `r = 10⁻²`.
pub struct CollarEvaluator<'a> {
    bg: &'a FermiBackground,
    eta_m1: LogSeries,
    d1: LogSeries,
    d2: LogSeries,
    eta_t: LogSeries,
    eta_tt: LogSeries,
}

impl<'a> CollarEvaluator<'a> {
    pub fn new(eta: &LogPowerSeries, bg: &'a FermiBackground) -> Self {
        let s = eta.series();
        let eta_m1 = s.sub(&LogSeries::constant(1.0, s.order(), s.cap()));
        let d1 = s.euler();
        let d2 = d1.euler();
        Self {
            bg,
            eta_m1,
            d1,
            d2,
            eta_t: s.d_theta(),
            eta_tt: s.d_theta2(),
        }
    }

    pub fn rho(&self, r: f64, theta: f64) -> f64 {
        r * (1.0 + self.eta_m1.eval(r, theta))
    }

    /// `∂ρ/∂r = η + Dη`.
    pub fn rho_r(&self, r: f64, theta: f64) -> f64 {
        1.0 + self.eta_m1.eval(r, theta) + self.d1.eval(r, theta)
    }

    /// `1 − |∇ρ|² + ρΔρ + ρ²K`, which equals `K₀ + 1` for `g₀ = h/ρ²`.
    pub fn residual(&self, r: f64, theta: f64) -> f64 {
        let em1 = self.eta_m1.eval(r, theta);
        let eta = 1.0 + em1;
        let d1 = self.d1.eval(r, theta);
        let d2 = self.d2.eval(r, theta);
        let et = self.eta_t.eval(r, theta);
        let ett = self.eta_tt.eval(r, theta);
        let [a, ar, arr, at] = self.bg.warp_jet(r, theta);
        let b = ar / (2.0 * a);
        let c = -at / (2.0 * a * a);
        let d = 1.0 / a;
        let k = -arr / (2.0 * a) + ar * ar / (4.0 * a * a);
        let delta = em1 + d1;
        let r2 = r * r;
        let terms = [
            eta * (d2 + d1),
            b * r * eta * (1.0 + delta),
            c * r2 * eta * et,
            d * r2 * eta * ett,
            -delta * (2.0 + delta),
            -d * r2 * et * et,
            r2 * eta * eta * k,
        ];
        terms.iter().sum()
    }

    /// `max_θ |K₀ + 1|` over evenly spaced angles.
    pub fn residual_sup(&self, r: f64) -> f64 {
        (0..THETA_SAMPLES)
            .map(|j| self.residual(r, 2.0 * PI * j as f64 / THETA_SAMPLES as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// `(r, max_θ |K₀ + 1|)` at log-spaced radii.
pub fn residual_profile(
    eta: &LogPowerSeries,
    bg: &FermiBackground,
    r_window: (f64, f64),
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = r_window;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || samples < 2 {
        return Err(Error::InvalidArgument(format!("bad residual window {r_window:?}")));
    }
    let ev = CollarEvaluator::new(eta, bg);
    Ok((0..samples)
        .map(|k| {
            let r = lo * (hi / lo).powf(k as f64 / (samples - 1) as f64);
            (r, ev.residual_sup(r))
        })
        .collect())
}

/// Outcome of fitting `log|K₀ + 1|` against `log r`.
#[derive(Clone, Debug, PartialEq)]
pub enum ResidualOrder {
    /// Fewer than three samples rise above [`RESIDUAL_FLOOR`].
    Exact { max_residual: f64 },
    Slope { slope: f64, fit: LineFit, points: usize },
}

impl ResidualOrder {
    /// Fitted slope; `+∞` for an exact solution.
    pub fn slope(&self) -> f64 {
        match self {
            Self::Exact { .. } => f64::INFINITY,
            Self::Slope { slope, .. } => *slope,
        }
    }
}

/// Order of vanishing of `K₀ + 1` as `r → 0`, from a least-squares line
/// through the samples above the rounding floor.
pub fn residual_order_check(eta: &LogPowerSeries, bg: &FermiBackground, r_window: (f64, f64)) -> Result<ResidualOrder> {
    let profile = residual_profile(eta, bg, r_window, RESIDUAL_SAMPLES)?;
    let max_residual = profile.iter().map(|p| p.1).fold(0.0, f64::max);
    let kept: Vec<&(f64, f64)> = profile.iter().filter(|p| p.1 >= RESIDUAL_FLOOR).collect();
    if kept.len() < 3 {
        return Ok(ResidualOrder::Exact { max_residual });
    }
    let x: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let fit = fit_line(&x, &y).ok_or_else(|| Error::FitUndefined("degenerate residual samples".into()))?;
    Ok(ResidualOrder::Slope {
        slope: fit.slope,
        fit,
        points: kept.len(),
    })
}

/// Residual-order report: `r,residual` rows.
pub fn write_residual_csv(path: &Path, profile: &[(f64, f64)]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "r,residual")?;
    for (r, v) in profile {
        writeln!(out, "{},{}", format_float(*r), format_float(*v))?;
    }
    out.flush()?;
    Ok(())
}

fn check_range(eta: &LogPowerSeries, bg: &FermiBackground, r_range: (f64, f64)) -> Result<()> {
    let (r0, r1) = r_range;
    if !(r0 > 0.0 && r1 > r0 && r1.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad collar range {r_range:?}")));
    }
    let ev = CollarEvaluator::new(eta, bg);
    for k in 0..=200 {
        let r = r0 + (r1 - r0) * k as f64 / 200.0;
        let a = bg.warp_jet(r, 0.0)[0];
        if !(ev.rho(r, 0.0) > 0.0 && a > 0.0) {
            return Err(Error::Precondition(format!("ρ or A is not positive at r = {r}")));
        }
    }
    Ok(())
}

/// The collar metric `2h/ρ²` (scalar curvature → −1) as a conformal strip.
///
/// With `A = A(r)` the metric is `(2A/ρ²)(ds² + dθ²)` for `s = ∫ dr/√A`, so
/// the chart has `Φ = ½ log 2 + ½ log A − log ρ` on a uniform s grid.
/// `row_radius[i]` is the Fermi coordinate `r` of row `i`.
pub fn eta_to_rho_chart(
    eta: &LogPowerSeries,
    bg: &FermiBackground,
    r_range: (f64, f64),
    n_s: usize,
    n_theta: usize,
) -> Result<WarpChart> {
    if !bg.is_radial() {
        return Err(Error::Precondition(
            "a conformal chart needs a θ-independent warp A; isothermal coordinates for general A are not built".into(),
        ));
    }
    check_range(eta, bg, r_range)?;
    let (r0, r1) = r_range;
    let fine = (64 * n_s).max(20_001);
    let h = (r1 - r0) / (fine - 1) as f64;
    let inv_sqrt = |r: f64| 1.0 / bg.warp_jet(r, 0.0)[0].sqrt();
    let radii: Vec<f64> = (0..fine).map(|k| r0 + h * k as f64).collect();
    let mut s_of_r = vec![0.0; fine];
    for k in 1..fine {
        let (a, b) = (radii[k - 1], radii[k]);
        let simpson = (b - a) / 6.0 * (inv_sqrt(a) + 4.0 * inv_sqrt(0.5 * (a + b)) + inv_sqrt(b));
        s_of_r[k] = s_of_r[k - 1] + simpson;
    }
    let slope: Vec<f64> = radii.iter().map(|&r| 1.0 / inv_sqrt(r)).collect();
    let length = s_of_r[fine - 1];
    let h_s = length / (n_s - 1) as f64;
    let ev = CollarEvaluator::new(eta, bg);
    let mut row_radius = Vec::with_capacity(n_s);
    let mut phi0 = Vec::with_capacity(n_s * n_theta);
    for i in 0..n_s {
        let r = if i + 1 == n_s {
            r1
        } else {
            hermite_eval(&s_of_r, &radii, &slope, h_s * i as f64)
        };
        let phi = 0.5 * LN_2 + 0.5 * bg.warp_jet(r, 0.0)[0].ln() - ev.rho(r, 0.0).ln();
        row_radius.push(r);
        phi0.extend(std::iter::repeat(phi).take(n_theta));
    }
    let chart = ConformalChart::new(Topology::Strip, n_s, n_theta, h_s, 2.0 * PI / n_theta as f64, phi0)?;
    Ok(WarpChart {
        state: MetricState::background(chart),
        row_radius,
    })
}

/// `∫ |R + 1| dV` of the metric `2h/ρ²` over `r_range × S¹`.
///
/// Uses `R + 1 = K₀ + 1` and `dV = 2√A/ρ² dr dθ`, with Simpson's rule in
/// `log r` and the periodic trapezoid rule in θ.
pub fn collar_curvature_excess(eta: &LogPowerSeries, bg: &FermiBackground, r_range: (f64, f64)) -> Result<f64> {
    check_range(eta, bg, r_range)?;
    let ev = CollarEvaluator::new(eta, bg);
    let (u0, u1) = (r_range.0.ln(), r_range.1.ln());
    let panels = 2000;
    let hu = (u1 - u0) / panels as f64;
    let integrand = |u: f64| {
        let r = u.exp();
        let rows: Vec<f64> = (0..THETA_SAMPLES)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / THETA_SAMPLES as f64;
                let rho = ev.rho(r, t);
                let a = bg.warp_jet(r, t)[0];
                ev.residual(r, t).abs() * 2.0 * a.sqrt() / (rho * rho)
            })
            .collect();
        pairwise_sum(&rows) * 2.0 * PI / THETA_SAMPLES as f64 * r
    };
    let terms: Vec<f64> = (0..=2 * panels)
        .map(|k| {
            let w = if k == 0 || k == 2 * panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * integrand(u0 + 0.5 * hu * k as f64)
        })
        .collect();
    Ok(pairwise_sum(&terms) * hu / 6.0)
}
