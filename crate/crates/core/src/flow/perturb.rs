//! Compactly supported perturbations of initial data.

use serde::{Deserialize, Serialize};

use crate::geometry::{Edge, MetricState};
use crate::{Error, Result};

/// `amplitude·e^{−x²}·τ(|s − c|/σ)` added to `phi`, with `x = (s − c)/width`,
/// `c` measured from the middle of the chart's s range and `τ(y) =
/// exp(1 − 1/(1 − y²))` a smooth cutoff. The support half-width `σ` is the
/// largest that keeps the bump at least a quarter of the s range away from
/// both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Default for Bump {
    fn default() -> Self {
        Self {
            amplitude: 0.1,
            center: 0.0,
            width: 0.35,
        }
    }
}

impl Bump {
    /// Profile value at `s` for a chart whose s range is `[lo, hi]`.
    pub fn profile(&self, s: f64, lo: f64, hi: f64) -> Result<f64> {
        let len = hi - lo;
        let c = 0.5 * (lo + hi) + self.center;
        let support = (c - (lo + 0.25 * len)).min(hi - 0.25 * len - c);
        if !(support > 0.0) || !(self.width > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::Precondition(format!(
                "bump centred {} from the middle must stay a quarter of the domain away from the boundary",
                self.center
            )));
        }
        let y = (s - c) / support;
        if y.abs() >= 1.0 {
            return Ok(0.0);
        }
        let x = (s - c) / self.width;
        Ok(self.amplitude * (-x * x).exp() * (1.0 - 1.0 / (1.0 - y * y)).exp())
    }
}

/// Adds the bump to `phi` along s (constant in θ).
pub fn perturb(m: &MetricState, bump: &Bump) -> Result<MetricState> {
    let c = &*m.chart;
    if c.topology.s_edge() != Edge::Dirichlet {
        return Err(Error::InvalidArgument("bumps are placed along a bounded s range".into()));
    }
    let lo = c.s_at(0);
    let hi = c.s_at(c.n_s - 1);
    let mut phi = m.phi.clone();
    for i in 0..c.n_s {
        let v = bump.profile(c.s_at(i), lo, hi)?;
        for j in 0..c.n_theta {
            phi.values[c.index(i, j)] += v;
        }
    }
    m.with_phi(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::surfaces::funnel;

    #[test]
    fn bump_is_compact_and_peaks_in_the_middle() {
        let w = funnel(6.0, 129, 4).unwrap();
        let m = perturb(&w.state, &Bump::default()).unwrap();
        let d: Vec<f64> = (0..129).map(|i| m.phi.get(i, 0) - w.state.phi.get(i, 0)).collect();
        assert!((d[64] - 0.1).abs() < 1e-12);
        assert!(d[..32].iter().chain(&d[97..]).all(|v| *v == 0.0));
        assert!(d.iter().all(|v| *v >= 0.0 && *v <= 0.1));
    }

    #[test]
    fn off_centre_bump_is_reported() {
        let w = funnel(6.0, 64, 4).unwrap();
        let b = Bump {
            center: 1.5,
            ..Bump::default()
        };
        assert!(matches!(perturb(&w.state, &b), Err(Error::Precondition(_))));
    }
}
