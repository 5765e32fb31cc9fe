//! Rotationally symmetric surfaces `dr² + f(r)² dθ²` and their conformal charts.

use std::f64::consts::PI;

use super::chart::{ConformalChart, MetricState, Topology};
use crate::numeric::{hermite_eval, nonuniform_derivative};
use crate::{Error, Result};

/// Samples of a warp function `f(r) > 0` on a strictly increasing `r` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpedProfile {
    r: Vec<f64>,
    f: Vec<f64>,
}

impl WarpedProfile {
    pub fn new(r: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if r.len() != f.len() || r.len() < 3 {
            return Err(Error::InvalidProfile(format!(
                "need at least three matching samples, got {} radii and {} values",
                r.len(),
                f.len()
            )));
        }
        if let Some(k) = r.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile(format!("r not strictly increasing at sample {k}")));
        }
        if let Some(k) = f.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidProfile(format!("f(r) = {} is not positive at sample {k}", f[k])));
        }
        Ok(Self { r, f })
    }

    /// Samples `f` at `samples` equally spaced radii in `[r_min, r_max]`.
    pub fn from_fn(f: impl Fn(f64) -> f64, r_min: f64, r_max: f64, samples: usize) -> Result<Self> {
        if !(r_max > r_min) || samples < 3 {
            return Err(Error::InvalidProfile("empty radius range".into()));
        }
        let dr = (r_max - r_min) / (samples - 1) as f64;
        let r: Vec<f64> = (0..samples).map(|k| r_min + k as f64 * dr).collect();
        let fv = r.iter().map(|&x| f(x)).collect();
        Self::new(r, fv)
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }
}

/// A warped-profile chart together with the radius of every grid row.
#[derive(Clone, Debug)]
pub struct WarpChart {
    pub state: MetricState,
    pub row_radius: Vec<f64>,
}

/// Conformal chart of a warped profile with the default θ resolution.
pub fn warp_to_chart(p: &WarpedProfile, n_s: usize, n_theta: usize) -> Result<MetricState> {
    Ok(warp_to_chart_with_radii(p, n_s, n_theta)?.state)
}

/// Builds the θ-periodic strip chart of `dr² + f² dθ²`.
///
/// The conformal coordinate is `s(r) = ∫ dr/f` (trapezoid rule on the
/// profile samples); then `dr² + f²dθ² = f²(ds² + dθ²)`, so `Φ(s) = log f(r(s))`.
/// Both `Φ` and `r` are resampled onto a uniform s grid with cubic Hermite
/// interpolation (`dr/ds = f` is exact at the nodes). θ has period 2π.
pub fn warp_to_chart_with_radii(p: &WarpedProfile, n_s: usize, n_theta: usize) -> Result<WarpChart> {
    let n = p.r.len();
    let mut s = vec![0.0; n];
    for k in 1..n {
        let dr = p.r[k] - p.r[k - 1];
        s[k] = s[k - 1] + 0.5 * dr * (1.0 / p.f[k] + 1.0 / p.f[k - 1]);
        if !(s[k] > s[k - 1]) || !s[k].is_finite() {
            return Err(Error::InvalidProfile(format!(
                "conformal coordinate is not strictly increasing at sample {k}"
            )));
        }
    }
    let log_f: Vec<f64> = p.f.iter().map(|v| v.ln()).collect();
    let dlog_f = nonuniform_derivative(&s, &log_f);
    let s_min = s[0];
    let h_s = (s[n - 1] - s_min) / (n_s.max(2) - 1) as f64;
    let h_theta = 2.0 * PI / n_theta.max(1) as f64;

    let mut phi0 = vec![0.0; n_s * n_theta];
    let mut row_radius = vec![0.0; n_s];
    for i in 0..n_s {
        let q = if i + 1 == n_s { s[n - 1] } else { s_min + i as f64 * h_s };
        let value = hermite_eval(&s, &log_f, &dlog_f, q);
        row_radius[i] = hermite_eval(&s, &p.r, &p.f, q);
        phi0[i * n_theta..(i + 1) * n_theta].fill(value);
    }
    let chart = ConformalChart::new(Topology::Strip, n_s, n_theta, h_s, h_theta, phi0)?.with_origin(s_min, 0.0);
    Ok(WarpChart {
        state: MetricState::background(chart),
        row_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ops::scalar_curvature;

    #[test]
    fn profile_validation() {
        assert!(WarpedProfile::new(vec![0.0, 1.0, 1.0], vec![1.0; 3]).is_err());
        assert!(WarpedProfile::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0]).is_err());
        assert!(WarpedProfile::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn unit_warp_is_a_flat_cylinder() {
        let p = WarpedProfile::from_fn(|_| 1.0, -2.0, 2.0, 401).unwrap();
        let w = warp_to_chart_with_radii(&p, 64, 32).unwrap();
        assert!(w.state.chart.phi0.iter().all(|v| v.abs() < 1e-15));
        assert!((w.state.chart.h_s * 63.0 - 4.0).abs() < 1e-12);
        assert!((w.row_radius[63] - 2.0).abs() < 1e-12);
    }

    fn curvature_error(f: impl Fn(f64) -> f64, r0: f64, r1: f64, target: f64, n_s: usize) -> f64 {
        let p = WarpedProfile::from_fn(f, r0, r1, 40_001).unwrap();
        let m = warp_to_chart(&p, n_s, 16).unwrap();
        let r = scalar_curvature(&m);
        (1..n_s - 1)
            .map(|i| (r.get(i, 0) - target).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn funnel_cusp_and_sphere_curvatures() {
        let sq = 2f64.sqrt();
        let funnel = |n| curvature_error(|r| (r / sq).cosh(), -4.0, 4.0, -1.0, n);
        let cusp = |n| curvature_error(|r| (-r / sq).exp(), 0.0, 4.0, -1.0, n);
        let sphere = |n| curvature_error(|r: f64| r.sin(), 0.3, PI - 0.3, 2.0, n);
        for g in [&funnel as &dyn Fn(usize) -> f64, &cusp, &sphere] {
            let (e1, e2) = (g(64), g(128));
            assert!(e1 < 5e-2, "coarse error {e1}");
            assert!(e1 / e2 > 3.0, "ratio {}", e1 / e2);
        }
    }
}
