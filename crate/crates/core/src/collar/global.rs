//! Global utilities: Gauss–Bonnet, volume normalization and Poisson's
//! equation on closed charts.

use std::f64::consts::PI;
use std::fmt;

use crate::elliptic::solve_poisson;
use crate::geometry::{grad_norm_sq, integrate, scalar_curvature, ConformalChart, Edge, MetricState, ScalarField};
use crate::numeric::pairwise_sum;
use crate::{Error, Result};

/// Curvature integral against the topological value.
///
/// `gaussian = ∫K dV` is compared with `2πχ`. Because `R = 2K`, the scalar
/// integral is `2·gaussian`; `scalar_defect_as_written` compares it with
/// `2πχ` as well, which only balances for `χ = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussBonnet {
    pub gaussian: f64,
    pub target: f64,
    pub defect: f64,
    /// `|defect|` over `max(|2πχ|, ∫|K| dV + |completion|)`.
    pub relative_defect: f64,
    pub scalar: f64,
    pub scalar_defect_as_written: f64,
}

impl fmt::Display for GaussBonnet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "∫K dV = {:.12e} vs 2πχ = {:.12e} (defect {:.3e}); ∫R dV = {:.12e} (defect vs 2πχ {:.3e}, vs 4πχ {:.3e})",
            self.gaussian,
            self.target,
            self.defect,
            self.scalar,
            self.scalar_defect_as_written,
            self.scalar - 2.0 * self.target
        )
    }
}

/// Gauss–Bonnet on a closed chart.
pub fn gauss_bonnet(m: &MetricState, chi: i64) -> Result<GaussBonnet> {
    if !m.chart.topology.is_closed() {
        return Err(Error::Precondition(
            "the chart has boundary; add the analytic contribution of the removed ends with gauss_bonnet_completed"
                .into(),
        ));
    }
    gauss_bonnet_completed(m, chi, 0.0)
}

/// Gauss–Bonnet on a truncated chart, where `completion` is the analytic
/// `∫K dV + ∮k_g ds` of whatever was cut away (caps, cusp tails, boundary
/// turning).
pub fn gauss_bonnet_completed(m: &MetricState, chi: i64, completion: f64) -> Result<GaussBonnet> {
    let k = scalar_curvature(m).map(|r| 0.5 * r);
    let body = integrate(&k, m)?;
    let body_abs = integrate(&k.map(f64::abs), m)?;
    let gaussian = body + completion;
    let target = 2.0 * PI * chi as f64;
    let defect = gaussian - target;
    let scale = target.abs().max(body_abs + completion.abs());
    Ok(GaussBonnet {
        gaussian,
        target,
        defect,
        relative_defect: if scale > 0.0 { defect.abs() / scale } else { defect.abs() },
        scalar: 2.0 * gaussian,
        scalar_defect_as_written: 2.0 * gaussian - target,
    })
}

/// Largest `|α|` of the normalizing bump.
pub const MAX_BUMP_AMPLITUDE: f64 = 5.0;
const BISECTION_TOL: f64 = 1e-12;

/// Coordinate box outside which the normalizing bump vanishes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpRegion {
    pub s: (f64, f64),
    /// `None` when the bump is constant along θ.
    pub theta: Option<(f64, f64)>,
}

impl BumpRegion {
    pub fn contains(&self, s: f64, theta: f64) -> bool {
        let inside = |x: f64, (a, b): (f64, f64)| x > a && x < b;
        inside(s, self.s) && self.theta.map_or(true, |t| inside(theta, t))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VolumeNormalization {
    /// Added to the log-conformal factor: the new metric is `e^{2f} g`.
    pub f: ScalarField,
    pub alpha: f64,
    pub iterations: usize,
    pub volume: f64,
    pub region: BumpRegion,
}

/// Middle half of a coordinate line, as `(centre, half-width, open interval)`.
fn middle_half(start: f64, n: usize, h: f64, edge: Edge) -> (f64, f64, (f64, f64)) {
    let len = match edge {
        Edge::Dirichlet => (n - 1) as f64 * h,
        Edge::Periodic => n as f64 * h,
    };
    let c = start + 0.5 * len;
    let w = 0.25 * len;
    (c, w, (c - w, c + w))
}

fn cutoff(x: f64, c: f64, w: f64) -> f64 {
    let y = (x - c) / w;
    if y.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - y * y)).exp()
    }
}

/// The fixed profile `b ∈ [0, 1]`: a smooth cutoff over the middle half of
/// the s range, and of the θ range when θ is not periodic.
pub fn normalization_bump(c: &ConformalChart) -> (ScalarField, BumpRegion) {
    let (cs, ws, s_int) = middle_half(c.s0, c.n_s, c.h_s, c.topology.s_edge());
    let theta = (c.topology.theta_edge() == Edge::Dirichlet)
        .then(|| middle_half(c.theta0, c.n_theta, c.h_theta, Edge::Dirichlet));
    let region = BumpRegion {
        s: s_int,
        theta: theta.map(|t| t.2),
    };
    let f = ScalarField::from_fn(c, |s, t| {
        let bt = theta.map_or(1.0, |(ct, wt, _)| cutoff(t, ct, wt));
        cutoff(s, cs, ws) * bt
    });
    (f, region)
}

/// Finds `f = α·b` with `|α| ≤ 5` such that `e^{2f}g` has the target area,
/// by bisection on the monotone map `α ↦ volume`.
pub fn volume_normalize(m: &MetricState, target: f64) -> Result<VolumeNormalization> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidArgument(format!("target volume {target} must be positive")));
    }
    let c = &*m.chart;
    let (bump, region) = normalization_bump(c);
    let phi = m.total_phi();
    let weights: Vec<f64> = (0..c.len())
        .map(|k| {
            let (i, j) = c.unflatten(k);
            (2.0 * phi[k]).exp() * c.cell_weight(i, j)
        })
        .collect();
    if !weights.iter().all(|w| w.is_finite()) {
        return Err(Error::Precondition("the chart volume is not finite".into()));
    }
    let vol = |alpha: f64| {
        let terms: Vec<f64> = weights
            .iter()
            .zip(&bump.values)
            .map(|(w, b)| w * (2.0 * alpha * b).exp())
            .collect();
        pairwise_sum(&terms)
    };
    let (min, max) = (vol(-MAX_BUMP_AMPLITUDE), vol(MAX_BUMP_AMPLITUDE));
    if !(target >= min && target <= max) {
        return Err(Error::Unachievable { target, min, max });
    }
    let (mut lo, mut hi) = (-MAX_BUMP_AMPLITUDE, MAX_BUMP_AMPLITUDE);
    let mut iterations = 0;
    let (alpha, volume) = loop {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let v = vol(mid);
        if (v - target).abs() <= BISECTION_TOL * target || hi - lo <= f64::EPSILON {
            break (mid, v);
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    };
    Ok(VolumeNormalization {
        f: bump.map(|b| alpha * b),
        alpha,
        iterations,
        volume,
        region,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompactPoisson {
    pub u: ScalarField,
    /// `max |∇u|` on the grid.
    pub grad_max: f64,
}

/// Solves `Δu = q` on a closed chart with `∫u dV = 0`. The source must
/// satisfy `|∫q dV| ≤ 10⁻⁸‖q‖₁`.
pub fn compact_poisson(m: &MetricState, q: &ScalarField) -> Result<CompactPoisson> {
    if !m.chart.topology.is_closed() {
        return Err(Error::Precondition("compact Poisson needs a closed chart".into()));
    }
    let u = solve_poisson(m, q, None)?;
    let grad_max = grad_norm_sq(&u, m)?.sup().sqrt();
    Ok(CompactPoisson { u, grad_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::surfaces::{flat_torus, sphere_band};
    use crate::geometry::volume;

    #[test]
    fn flat_torus_has_zero_curvature_integral() {
        let m = flat_torus(32, 32, 1.0, 1.0).unwrap();
        let gb = gauss_bonnet(&m, 0).unwrap();
        assert!(gb.defect.abs() <= 1e-12);
        assert!(gb.to_string().contains("4πχ"));
    }

    #[test]
    fn sphere_with_caps_restored() {
        let cap: f64 = 0.3;
        let w = sphere_band(cap, 256, 16).unwrap();
        assert!(gauss_bonnet(&w.state, 2).is_err());
        let caps = 2.0 * 2.0 * PI * (1.0 - cap.cos());
        let gb = gauss_bonnet_completed(&w.state, 2, caps).unwrap();
        assert!(gb.relative_defect <= 0.01, "{gb}");
        assert!((gb.scalar_defect_as_written - 4.0 * PI).abs() < 0.1);
    }

    #[test]
    fn volume_normalization_examples() {
        let m = flat_torus(64, 64, 1.0, 1.0).unwrap();
        let same = volume_normalize(&m, volume(&m)).unwrap();
        assert_eq!(same.alpha, 0.0);
        assert!(same.f.values.iter().all(|v| *v == 0.0));

        let n = volume_normalize(&m, 2.0).unwrap();
        assert!(n.iterations <= 60, "{}", n.iterations);
        let scaled = m.with_phi(n.f.clone()).unwrap();
        assert!((volume(&scaled) / 2.0 - 1.0).abs() <= 1e-8);
        let c = &*m.chart;
        for i in 0..c.n_s {
            for j in 0..c.n_theta {
                if !n.region.contains(c.s_at(i), c.theta_at(j)) {
                    assert_eq!(n.f.get(i, j), 0.0);
                }
            }
        }
        match volume_normalize(&m, 1e6) {
            Err(Error::Unachievable { min, max, .. }) => assert!(min < 1.0 && max > 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn compact_poisson_examples() {
        let m = flat_torus(64, 16, 1.0, 1.0).unwrap();
        let zero = compact_poisson(&m, &ScalarField::constant(&m.chart, 0.0)).unwrap();
        assert!(zero.u.values.iter().all(|v| *v == 0.0));
        let q = ScalarField::from_fn(&m.chart, |s, _| (2.0 * PI * s).cos());
        let sol = compact_poisson(&m, &q).unwrap();
        let h2 = m.chart.h_s * m.chart.h_s;
        let err = ScalarField::from_fn(&m.chart, |s, _| -(2.0 * PI * s).cos() / (4.0 * PI * PI))
            .zip_with(&sol.u, |a, b| a - b)
            .unwrap()
            .sup_abs();
        assert!(err <= h2, "{err:e}");
        assert!((sol.grad_max - 1.0 / (2.0 * PI)).abs() < 0.01);
        let biased = q.map(|v| v + 0.1);
        assert!(matches!(compact_poisson(&m, &biased), Err(Error::NonZeroMean { .. })));
    }
}
