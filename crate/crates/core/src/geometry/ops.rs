//! Metric-aware difference operators on conformal grids.
//!
//! Interior derivatives are second-order centered differences. Periodic
//! directions wrap; at Dirichlet edges the stencils switch to second-order
//! one-sided formulas, so every operator is defined on the whole grid.

use super::chart::{ConformalChart, Edge, MetricState, ScalarField};
use crate::numeric::pairwise_sum;
use crate::Result;

#[inline]
fn wrap(k: isize, n: usize) -> usize {
    k.rem_euclid(n as isize) as usize
}

/// Stencil offsets and weights (before division by `h` or `h²`) for a first
/// derivative at position `i` of a line with `n` nodes.
#[inline]
fn first_weights(i: usize, n: usize, edge: Edge) -> ([isize; 3], [f64; 3]) {
    match edge {
        Edge::Periodic => ([-1, 0, 1], [-0.5, 0.0, 0.5]),
        Edge::Dirichlet if i == 0 => ([0, 1, 2], [-1.5, 2.0, -0.5]),
        Edge::Dirichlet if i + 1 == n => ([0, -1, -2], [1.5, -2.0, 0.5]),
        Edge::Dirichlet => ([-1, 0, 1], [-0.5, 0.0, 0.5]),
    }
}

#[inline]
fn second_weights(i: usize, n: usize, edge: Edge) -> ([isize; 4], [f64; 4]) {
    match edge {
        Edge::Periodic => ([-1, 0, 1, 0], [1.0, -2.0, 1.0, 0.0]),
        Edge::Dirichlet if i == 0 => ([0, 1, 2, 3], [2.0, -5.0, 4.0, -1.0]),
        Edge::Dirichlet if i + 1 == n => ([0, -1, -2, -3], [2.0, -5.0, 4.0, -1.0]),
        Edge::Dirichlet => ([-1, 0, 1, 0], [1.0, -2.0, 1.0, 0.0]),
    }
}

/// Flat first and second partial derivatives of grid samples.
pub(crate) struct Diff<'a> {
    c: &'a ConformalChart,
    u: &'a [f64],
}

impl<'a> Diff<'a> {
    pub(crate) fn new(c: &'a ConformalChart, u: &'a [f64]) -> Self {
        Self { c, u }
    }

    #[inline]
    fn at(&self, i: isize, j: isize) -> f64 {
        let i = wrap(i, self.c.n_s);
        let j = wrap(j, self.c.n_theta);
        self.u[i * self.c.n_theta + j]
    }

    pub(crate) fn ds(&self, i: usize, j: usize) -> f64 {
        let (off, w) = first_weights(i, self.c.n_s, self.c.topology.s_edge());
        let mut acc = 0.0;
        for k in 0..3 {
            acc += w[k] * self.at(i as isize + off[k], j as isize);
        }
        acc / self.c.h_s
    }

    pub(crate) fn dt(&self, i: usize, j: usize) -> f64 {
        let (off, w) = first_weights(j, self.c.n_theta, self.c.topology.theta_edge());
        let mut acc = 0.0;
        for k in 0..3 {
            acc += w[k] * self.at(i as isize, j as isize + off[k]);
        }
        acc / self.c.h_theta
    }

    pub(crate) fn dss(&self, i: usize, j: usize) -> f64 {
        let (off, w) = second_weights(i, self.c.n_s, self.c.topology.s_edge());
        let mut acc = 0.0;
        for k in 0..4 {
            acc += w[k] * self.at(i as isize + off[k], j as isize);
        }
        acc / (self.c.h_s * self.c.h_s)
    }

    pub(crate) fn dtt(&self, i: usize, j: usize) -> f64 {
        let (off, w) = second_weights(j, self.c.n_theta, self.c.topology.theta_edge());
        let mut acc = 0.0;
        for k in 0..4 {
            acc += w[k] * self.at(i as isize, j as isize + off[k]);
        }
        acc / (self.c.h_theta * self.c.h_theta)
    }

    /// Mixed derivative: the s-stencil applied to θ-derivatives.
    pub(crate) fn dst(&self, i: usize, j: usize) -> f64 {
        let (off, w) = first_weights(i, self.c.n_s, self.c.topology.s_edge());
        let mut acc = 0.0;
        for k in 0..3 {
            if w[k] != 0.0 {
                let ii = wrap(i as isize + off[k], self.c.n_s);
                acc += w[k] * self.dt(ii, j);
            }
        }
        acc / self.c.h_s
    }

    /// Five-point flat Laplacian `u_ss + u_θθ`.
    pub(crate) fn lap(&self, i: usize, j: usize) -> f64 {
        self.dss(i, j) + self.dtt(i, j)
    }
}

/// Flat Laplacian `u_ss + u_θθ` of raw samples on the chart grid.
pub(crate) fn flat_laplacian(c: &ConformalChart, u: &[f64]) -> Vec<f64> {
    let d = Diff::new(c, u);
    let mut out = vec![0.0; c.len()];
    for i in 0..c.n_s {
        for j in 0..c.n_theta {
            out[i * c.n_theta + j] = d.lap(i, j);
        }
    }
    out
}

/// Laplace–Beltrami operator `Δ_g u = e^{−2Φ}(u_ss + u_θθ)`.
pub fn laplace_beltrami(u: &ScalarField, m: &MetricState) -> Result<ScalarField> {
    u.check_aligned(&m.chart)?;
    let lap = flat_laplacian(&m.chart, &u.values);
    let phi = m.total_phi();
    let values = lap.iter().zip(&phi).map(|(l, p)| (-2.0 * p).exp() * l).collect();
    Ok(field_like(&m.chart, values))
}

/// Scalar curvature `R = e^{−2Φ}(κ − 2(Φ_ss + Φ_θθ))`, where κ is the chart's
/// reference curvature (zero for every genuine chart).
pub fn scalar_curvature(m: &MetricState) -> ScalarField {
    let phi = m.total_phi();
    let kappa = m.chart.reference_curvature;
    let lap = flat_laplacian(&m.chart, &phi);
    let values = lap
        .iter()
        .zip(&phi)
        .map(|(l, p)| (-2.0 * p).exp() * (kappa - 2.0 * l))
        .collect();
    field_like(&m.chart, values)
}

/// `|∇u|² = e^{−2Φ}(u_s² + u_θ²)`.
pub fn grad_norm_sq(u: &ScalarField, m: &MetricState) -> Result<ScalarField> {
    u.check_aligned(&m.chart)?;
    let c = &*m.chart;
    let phi = m.total_phi();
    let d = Diff::new(c, &u.values);
    let mut values = vec![0.0; c.len()];
    for i in 0..c.n_s {
        for j in 0..c.n_theta {
            let k = c.index(i, j);
            let (us, ut) = (d.ds(i, j), d.dt(i, j));
            values[k] = (-2.0 * phi[k]).exp() * (us * us + ut * ut);
        }
    }
    Ok(field_like(c, values))
}

/// Squared norm of the traceless Hessian `M = ∇∇u − ½(Δu)g`.
///
/// The covariant Hessian uses the Christoffel symbols of the conformal
/// metric; the trace is removed from the discrete Hessian itself, so `M` is
/// exactly traceless on the grid.
pub fn traceless_hessian_norm_sq(u: &ScalarField, m: &MetricState) -> Result<ScalarField> {
    u.check_aligned(&m.chart)?;
    let c = &*m.chart;
    let phi = m.total_phi();
    let du = Diff::new(c, &u.values);
    let dp = Diff::new(c, &phi);
    let mut values = vec![0.0; c.len()];
    for i in 0..c.n_s {
        for j in 0..c.n_theta {
            let k = c.index(i, j);
            let (us, ut) = (du.ds(i, j), du.dt(i, j));
            let (ps, pt) = (dp.ds(i, j), dp.dt(i, j));
            let hss = du.dss(i, j) - ps * us + pt * ut;
            let htt = du.dtt(i, j) + ps * us - pt * ut;
            let hst = du.dst(i, j) - pt * us - ps * ut;
            let mss = 0.5 * (hss - htt);
            values[k] = (-4.0 * phi[k]).exp() * 2.0 * (mss * mss + hst * hst);
        }
    }
    Ok(field_like(c, values))
}

/// `e^{2Φ}` times the dual-cell weight: the discrete volume element.
pub(crate) fn volume_element(m: &MetricState) -> Vec<f64> {
    let c = &*m.chart;
    let phi = m.total_phi();
    let mut out = vec![0.0; c.len()];
    for i in 0..c.n_s {
        for j in 0..c.n_theta {
            let k = c.index(i, j);
            out[k] = (2.0 * phi[k]).exp() * c.cell_weight(i, j);
        }
    }
    out
}

/// `∫ u dV` with trapezoid weights at Dirichlet edges and pairwise summation;
/// masked cells contribute nothing.
pub fn integrate(u: &ScalarField, m: &MetricState) -> Result<f64> {
    u.check_aligned(&m.chart)?;
    let vol = volume_element(m);
    let terms: Vec<f64> = u
        .values
        .iter()
        .zip(&vol)
        .enumerate()
        .map(|(k, (v, w))| if u.is_masked(k) { 0.0 } else { v * w })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Total area of the chart.
pub fn volume(m: &MetricState) -> f64 {
    pairwise_sum(&volume_element(m))
}

pub(crate) fn field_like(c: &ConformalChart, values: Vec<f64>) -> ScalarField {
    ScalarField {
        n_s: c.n_s,
        n_theta: c.n_theta,
        values,
        mask: None,
    }
}
