//! Ready-made test surfaces: funnels, cusps, cylinders, spheres and tori.

use std::f64::consts::{PI, SQRT_2};

use super::chart::{ConformalChart, MetricState, Topology};
use super::warp::{warp_to_chart_with_radii, WarpChart, WarpedProfile};
use crate::numeric::solve_tridiagonal;
use crate::{Error, Result};

fn profile_samples(n_s: usize) -> usize {
    (64 * n_s).max(20_001)
}

/// Re-solves a rotationally symmetric strip so that its discrete scalar
/// curvature equals `target` on every interior row.
///
/// The boundary rows keep their values; the interior solves the discrete
/// Liouville equation `(Φ_{i+1} − 2Φ_i + Φ_{i−1})/h² = −(target/2)·e^{2Φ_i}`
/// by Newton's method. The result differs from the input by the truncation
/// error of the analytic profile and makes the target an exact fixed point of
/// the discrete flow.
pub fn balance_constant_curvature(m: &MetricState, target: f64) -> Result<MetricState> {
    let c = &*m.chart;
    if c.topology != Topology::Strip || c.reference_curvature != 0.0 {
        return Err(Error::InvalidChart("balancing needs a θ-periodic strip".into()));
    }
    let total = m.flattened();
    if !total.chart.is_theta_independent() {
        return Err(Error::InvalidChart("balancing needs a rotationally symmetric factor".into()));
    }
    if !(target < 0.0) {
        return Err(Error::InvalidArgument("balancing is implemented for negative curvature".into()));
    }
    let n = c.n_s;
    let h2 = c.h_s * c.h_s;
    let mut phi: Vec<f64> = (0..n).map(|i| total.chart.phi0[i * c.n_theta]).collect();
    let inner = n - 2;
    let mut converged = false;
    for _ in 0..100 {
        let mut lower = vec![1.0 / h2; inner];
        let mut upper = vec![1.0 / h2; inner];
        let mut diag = vec![0.0; inner];
        let mut rhs = vec![0.0; inner];
        for k in 0..inner {
            let i = k + 1;
            let e = (2.0 * phi[i]).exp();
            rhs[k] = -((phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / h2 + 0.5 * target * e);
            diag[k] = -2.0 / h2 + target * e;
        }
        lower[0] = 0.0;
        upper[inner - 1] = 0.0;
        let delta = solve_tridiagonal(&lower, &diag, &upper, &rhs)
            .ok_or_else(|| Error::InvalidChart("singular balancing system".into()))?;
        let mut worst = 0.0f64;
        for k in 0..inner {
            phi[k + 1] += delta[k];
            worst = worst.max(delta[k].abs() / (1.0 + phi[k + 1].abs()));
        }
        if !worst.is_finite() {
            break;
        }
        if worst < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::InvalidChart("balancing Newton iteration did not converge".into()));
    }
    let mut chart = (*total.chart).clone();
    for i in 0..n {
        chart.phi0[i * c.n_theta..(i + 1) * c.n_theta].fill(phi[i]);
    }
    Ok(MetricState::background(chart))
}

fn balanced(w: WarpChart, target: f64) -> Result<WarpChart> {
    Ok(WarpChart {
        state: balance_constant_curvature(&w.state, target)?,
        row_radius: w.row_radius,
    })
}

/// Double-ended funnel `f(r) = cosh(r/√2)` on `[−r_max, r_max]`, balanced to
/// `R ≡ −1` (Gaussian curvature −1/2) on the grid.
pub fn funnel(r_max: f64, n_s: usize, n_theta: usize) -> Result<WarpChart> {
    let p = WarpedProfile::from_fn(|r| (r / SQRT_2).cosh(), -r_max, r_max, profile_samples(n_s))?;
    balanced(warp_to_chart_with_radii(&p, n_s, n_theta)?, -1.0)
}

/// Funnel `f(r) = waist·cosh(r)` of Gaussian curvature −1 (scalar −2): a
/// quotient of the hyperbolic plane by a hyperbolic translation of length
/// `2π·waist`.
pub fn hyperbolic_funnel(waist: f64, r_max: f64, n_s: usize, n_theta: usize) -> Result<WarpChart> {
    let p = WarpedProfile::from_fn(|r| waist * r.cosh(), -r_max, r_max, profile_samples(n_s))?;
    balanced(warp_to_chart_with_radii(&p, n_s, n_theta)?, -2.0)
}

/// Surface `f(r) = e^{r/√2}`: a cusp as `r → −∞` and an expanding end as
/// `r → +∞`, balanced to `R ≡ −1`.
pub fn cusp_funnel(r_max: f64, n_s: usize, n_theta: usize) -> Result<WarpChart> {
    let p = WarpedProfile::from_fn(|r| (r / SQRT_2).exp(), -r_max, r_max, profile_samples(n_s))?;
    balanced(warp_to_chart_with_radii(&p, n_s, n_theta)?, -1.0)
}

/// Flat cylinder of the given length and circumference 2π.
pub fn flat_cylinder(length: f64, n_s: usize, n_theta: usize) -> Result<WarpChart> {
    let p = WarpedProfile::from_fn(|_| 1.0, -0.5 * length, 0.5 * length, 1001)?;
    warp_to_chart_with_radii(&p, n_s, n_theta)
}

/// Unit sphere minus two polar caps of radius `cap`: `f(r) = sin r` on
/// `[cap, π − cap]`.
pub fn sphere_band(cap: f64, n_s: usize, n_theta: usize) -> Result<WarpChart> {
    if !(cap > 0.0 && cap < 0.5 * PI) {
        return Err(Error::InvalidArgument(format!("cap radius {cap} outside (0, π/2)")));
    }
    let p = WarpedProfile::from_fn(f64::sin, cap, PI - cap, profile_samples(n_s))?;
    warp_to_chart_with_radii(&p, n_s, n_theta)
}

/// Flat torus with the given periods.
pub fn flat_torus(n_s: usize, n_theta: usize, period_s: f64, period_theta: f64) -> Result<MetricState> {
    let chart = ConformalChart::flat(
        Topology::Torus,
        n_s,
        n_theta,
        period_s / n_s as f64,
        period_theta / n_theta as f64,
    )?;
    Ok(MetricState::background(chart))
}

/// Unit torus model carrying the spatially homogeneous curvature `r0`.
///
/// A flat periodic grid cannot carry constant nonzero curvature, so the
/// reference metric is given curvature `r0` while `Φ ≡ 0`. The flow then
/// reduces exactly to the scalar ODE of homogeneous data.
pub fn homogeneous_torus(n: usize, r0: f64) -> Result<MetricState> {
    let chart = ConformalChart::flat(Topology::Torus, n, n, 1.0 / n as f64, 1.0 / n as f64)?
        .with_reference_curvature(r0)?;
    Ok(MetricState::background(chart))
}
