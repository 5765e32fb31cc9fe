//! Hyperbolic cusp `8/(|z|² log²|z|²) |dz|²` in log-polar coordinates.

use std::f64::consts::{LN_2, PI};

use crate::geometry::{ConformalChart, MetricState, Topology};
use crate::{Error, Result};

/// Log-conformal factor of the cusp at `s = −log ρ`.
///
/// With `z = ρe^{iθ}` the flat metric is `|dz|² = ρ²(ds² + dθ²)`, so the cusp
/// becomes `(2/s²)(ds² + dθ²)`: `Φ = ½ log 2 − log s`, equivalently
/// `½ log 2 − log ρ − log|log ρ|` relative to `|dz|²`.
pub fn cusp_phi(s: f64) -> f64 {
    0.5 * LN_2 - s.ln()
}

/// The annulus `ρ ∈ rho_range` of the cusp as a strip chart in
/// `s = −log ρ ∈ [−log ρ₁, −log ρ₀]`. Scalar curvature is −1.
pub fn cusp_chart(rho_range: (f64, f64), n_s: usize, n_theta: usize) -> Result<MetricState> {
    let (r0, r1) = rho_range;
    if !(r0 > 0.0 && r1 > r0 && r1 < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "cusp radii must satisfy 0 < ρ₀ < ρ₁ < 1, got {rho_range:?}"
        )));
    }
    let (s0, s1) = (-r1.ln(), -r0.ln());
    let h_s = (s1 - s0) / (n_s - 1) as f64;
    let mut phi0 = Vec::with_capacity(n_s * n_theta);
    for i in 0..n_s {
        phi0.extend(std::iter::repeat(cusp_phi(s0 + h_s * i as f64)).take(n_theta));
    }
    let chart = ConformalChart::new(Topology::Strip, n_s, n_theta, h_s, 2.0 * PI / n_theta as f64, phi0)?
        .with_origin(s0, 0.0);
    Ok(MetricState::background(chart))
}

/// Area of the end `{ρ < ε}`: `∫_{−log ε}^∞ 2π·2/s² ds = 4π/(−log ε)`.
pub fn cusp_end_volume(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("cusp end radius {eps} outside (0, 1)")));
    }
    Ok(4.0 * PI / -eps.ln())
}

/// `∫ K dV` over the end `{ρ < ε}` (`K ≡ −½`).
pub fn cusp_end_curvature(eps: f64) -> Result<f64> {
    Ok(-0.5 * cusp_end_volume(eps)?)
}

/// Total geodesic curvature of the horocycle `ρ = ε`, measured with the
/// normal pointing away from the cusp: the circle has length `2π√2/s` and
/// curvature `1/√2`.
pub fn horocycle_turning(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("cusp end radius {eps} outside (0, 1)")));
    }
    Ok(2.0 * PI / -eps.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{scalar_curvature, volume};

    #[test]
    fn closed_form_and_curvature() {
        let m = cusp_chart((1e-4, 1e-1), 129, 8).unwrap();
        let c = &*m.chart;
        for i in [0, 17, 64, 128] {
            let s = c.s_at(i);
            let rho = (-s).exp();
            let direct = 0.5 * LN_2 - rho.ln() - rho.ln().abs().ln() + rho.ln();
            assert!((c.phi0[c.index(i, 3)] - direct).abs() <= 1e-12);
        }
        let r = scalar_curvature(&m);
        let h2 = c.h_s * c.h_s;
        for i in 1..c.n_s - 1 {
            assert!((r.get(i, 0) + 1.0).abs() <= 5.0 * h2);
        }
    }

    #[test]
    fn end_volume_is_finite_and_monotone() {
        let m = cusp_chart((1e-4, 1e-1), 513, 8).unwrap();
        let band = cusp_end_volume(1e-1).unwrap() - cusp_end_volume(1e-4).unwrap();
        assert!((volume(&m) / band - 1.0).abs() < 1e-4);
        let mut last = f64::INFINITY;
        for eps in [0.5, 0.1, 1e-2, 1e-4, 1e-8] {
            let v = cusp_end_volume(eps).unwrap();
            assert!(v.is_finite() && v < last);
            last = v;
        }
    }
}
