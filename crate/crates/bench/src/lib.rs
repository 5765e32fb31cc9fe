//! Fixtures shared by the benchmarks.

use ricci_core::collar::FermiBackground;
use ricci_core::flow::{perturb, Bump};
use ricci_core::geometry::surfaces::funnel;
use ricci_core::geometry::{MetricState, ScalarField};

/// Funnel of scalar curvature −1 on `n × n/4` cells, `r ∈ [−6, 6]`.
pub fn funnel_state(n: usize) -> MetricState {
    funnel(6.0, n, (n / 4).max(32)).expect("funnel").state
}

/// The same funnel with a bump of amplitude 0.1 at the waist.
pub fn bumped_funnel(n: usize) -> MetricState {
    let bump = Bump {
        amplitude: 0.1,
        center: 0.0,
        width: 0.35,
    };
    perturb(&funnel_state(n), &bump).expect("bump")
}

/// Smooth right-hand side vanishing at both ends of the chart.
pub fn smooth_source(m: &MetricState) -> ScalarField {
    let c = &*m.chart;
    let (s0, len) = (c.s_at(0), c.s_at(c.n_s - 1) - c.s_at(0));
    ScalarField::from_fn(c, |s, t| {
        let x = (s - s0) / len;
        (std::f64::consts::PI * x).sin() * (1.0 + 0.5 * t.cos())
    })
}

/// Radial collar background `A = 1 + r + r³/2`.
pub fn collar_background(order: usize) -> FermiBackground {
    FermiBackground::radial(&[1.0, 1.0, 0.0, 0.5], order, 8).expect("background")
}
