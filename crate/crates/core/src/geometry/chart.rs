use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Global shape of a conformal grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Periodic in θ, Dirichlet-pinned at both ends in s (annulus / truncated ends).
    Strip,
    /// Dirichlet on all four edges.
    Rectangle,
    /// Periodic in both directions.
    Torus,
}

/// Boundary treatment of one coordinate direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Dirichlet,
    Periodic,
}

impl Topology {
    pub fn s_edge(self) -> Edge {
        match self {
            Topology::Torus => Edge::Periodic,
            _ => Edge::Dirichlet,
        }
    }

    pub fn theta_edge(self) -> Edge {
        match self {
            Topology::Rectangle => Edge::Dirichlet,
            _ => Edge::Periodic,
        }
    }

    pub fn is_closed(self) -> bool {
        self == Topology::Torus
    }
}

/// A grid cell, `(s index, θ index)`.
pub type GridIndex = (usize, usize);

/// Uniform grid in conformal coordinates `(s, θ)` carrying the background
/// log-conformal factor `phi0`.
///
/// Samples are stored row-major with the s index as the row. A periodic
/// direction with `n` samples has period `n·h`; a Dirichlet direction spans
/// `(n − 1)·h` with both boundary nodes on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalChart {
    pub topology: Topology,
    pub n_s: usize,
    pub n_theta: usize,
    pub h_s: f64,
    pub h_theta: f64,
    /// Coordinate of row 0.
    pub s0: f64,
    /// Coordinate of column 0.
    pub theta0: f64,
    /// Scalar curvature of the reference metric `ds² + dθ²`.
    ///
    /// Always zero for genuine charts. A nonzero value turns a torus into a
    /// locally homogeneous model on which constant curvature is admissible,
    /// which is how spatially homogeneous solutions are represented.
    pub reference_curvature: f64,
    pub phi0: Vec<f64>,
}

impl ConformalChart {
    pub fn new(
        topology: Topology,
        n_s: usize,
        n_theta: usize,
        h_s: f64,
        h_theta: f64,
        phi0: Vec<f64>,
    ) -> Result<Self> {
        let chart = Self {
            topology,
            n_s,
            n_theta,
            h_s,
            h_theta,
            s0: 0.0,
            theta0: 0.0,
            reference_curvature: 0.0,
            phi0,
        };
        chart.validate()?;
        Ok(chart)
    }

    /// Flat chart (`phi0 ≡ 0`).
    pub fn flat(topology: Topology, n_s: usize, n_theta: usize, h_s: f64, h_theta: f64) -> Result<Self> {
        Self::new(topology, n_s, n_theta, h_s, h_theta, vec![0.0; n_s * n_theta])
    }

    pub fn with_origin(mut self, s0: f64, theta0: f64) -> Self {
        self.s0 = s0;
        self.theta0 = theta0;
        self
    }

    pub fn with_reference_curvature(mut self, kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::InvalidChart("reference curvature must be finite".into()));
        }
        if kappa != 0.0 && self.topology != Topology::Torus {
            return Err(Error::InvalidChart(
                "a curved reference metric is only supported on the torus model".into(),
            ));
        }
        self.reference_curvature = kappa;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidChart(msg));
        if !(self.h_s > 0.0 && self.h_s.is_finite() && self.h_theta > 0.0 && self.h_theta.is_finite()) {
            return bad(format!("spacings must be positive, got h_s={} h_theta={}", self.h_s, self.h_theta));
        }
        let min_len = |e: Edge| if e == Edge::Dirichlet { 4 } else { 3 };
        if self.n_s < min_len(self.topology.s_edge()) || self.n_theta < min_len(self.topology.theta_edge()) {
            return bad(format!("grid {}x{} too small for its boundary stencils", self.n_s, self.n_theta));
        }
        if self.phi0.len() != self.n_s * self.n_theta {
            return bad(format!(
                "phi0 has {} samples, expected {}",
                self.phi0.len(),
                self.n_s * self.n_theta
            ));
        }
        if let Some(k) = self.phi0.iter().position(|v| !v.is_finite()) {
            return bad(format!("phi0 is not finite at cell {:?}", self.unflatten(k)));
        }
        if !self.s0.is_finite() || !self.theta0.is_finite() {
            return bad("origin must be finite".into());
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_s, self.n_theta)
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    #[inline]
    pub fn unflatten(&self, k: usize) -> GridIndex {
        (k / self.n_theta, k % self.n_theta)
    }

    pub fn s_at(&self, i: usize) -> f64 {
        self.s0 + i as f64 * self.h_s
    }

    pub fn theta_at(&self, j: usize) -> f64 {
        self.theta0 + j as f64 * self.h_theta
    }

    /// Whether the cell sits on a pinned (Dirichlet) row or column.
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        let s_pin = self.topology.s_edge() == Edge::Dirichlet && (i == 0 || i + 1 == self.n_s);
        let t_pin = self.topology.theta_edge() == Edge::Dirichlet && (j == 0 || j + 1 == self.n_theta);
        s_pin || t_pin
    }

    /// Whether the cell is at least `margin` cells away from every Dirichlet edge.
    pub fn is_interior(&self, i: usize, j: usize, margin: usize) -> bool {
        let ok_s = self.topology.s_edge() == Edge::Periodic || (i >= margin && i + margin < self.n_s);
        let ok_t =
            self.topology.theta_edge() == Edge::Periodic || (j >= margin && j + margin < self.n_theta);
        ok_s && ok_t
    }

    /// Dual-cell area weight in coordinate units: `h_s·h_θ`, halved on each
    /// Dirichlet edge so that the weights form the trapezoid rule.
    pub fn cell_weight(&self, i: usize, j: usize) -> f64 {
        let mut w = self.h_s * self.h_theta;
        if self.topology.s_edge() == Edge::Dirichlet && (i == 0 || i + 1 == self.n_s) {
            w *= 0.5;
        }
        if self.topology.theta_edge() == Edge::Dirichlet && (j == 0 || j + 1 == self.n_theta) {
            w *= 0.5;
        }
        w
    }

    /// Whether `phi0` is constant along every row (rotational symmetry).
    pub fn is_theta_independent(&self) -> bool {
        (0..self.n_s).all(|i| {
            let row = &self.phi0[i * self.n_theta..(i + 1) * self.n_theta];
            row.iter().all(|v| *v == row[0])
        })
    }
}

/// Grid-sampled function tied to a chart shape, with an optional mask of
/// excluded cells (Green's function poles).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub n_s: usize,
    pub n_theta: usize,
    pub values: Vec<f64>,
    pub mask: Option<Vec<bool>>,
}

impl ScalarField {
    pub fn new(n_s: usize, n_theta: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_s * n_theta {
            return Err(Error::Alignment {
                expected: (n_s, n_theta),
                found: (values.len(), 1),
            });
        }
        Ok(Self {
            n_s,
            n_theta,
            values,
            mask: None,
        })
    }

    pub fn zeros_like(chart: &ConformalChart) -> Self {
        Self::constant(chart, 0.0)
    }

    pub fn constant(chart: &ConformalChart, value: f64) -> Self {
        Self {
            n_s: chart.n_s,
            n_theta: chart.n_theta,
            values: vec![value; chart.len()],
            mask: None,
        }
    }

    /// Samples `f(s, θ)` at the chart's grid coordinates.
    pub fn from_fn(chart: &ConformalChart, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(chart.len());
        for i in 0..chart.n_s {
            let s = chart.s_at(i);
            for j in 0..chart.n_theta {
                values.push(f(s, chart.theta_at(j)));
            }
        }
        Self {
            n_s: chart.n_s,
            n_theta: chart.n_theta,
            values,
            mask: None,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_s, self.n_theta)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_theta + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_theta + j] = v;
    }

    pub fn is_masked(&self, k: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| m[k])
    }

    pub fn with_masked_cell(mut self, i: usize, j: usize) -> Self {
        let n = self.values.len();
        let k = i * self.n_theta + j;
        self.mask.get_or_insert_with(|| vec![false; n])[k] = true;
        self
    }

    pub fn check_aligned(&self, chart: &ConformalChart) -> Result<()> {
        if self.shape() != chart.shape() || self.values.len() != chart.len() {
            return Err(Error::Alignment {
                expected: chart.shape(),
                found: self.shape(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n_s: self.n_s,
            n_theta: self.n_theta,
            values: self.values.iter().map(|v| f(*v)).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Elementwise combination of two aligned fields; masks are merged.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Alignment {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        let mask = match (&self.mask, &other.mask) {
            (None, None) => None,
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| *x || *y).collect()),
        };
        Ok(Self {
            n_s: self.n_s,
            n_theta: self.n_theta,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
            mask,
        })
    }

    /// Largest unmasked value, `-inf` when everything is masked.
    pub fn sup(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| !self.is_masked(*k))
            .fold(f64::NEG_INFINITY, |m, (_, v)| m.max(*v))
    }

    /// Smallest unmasked value, `+inf` when everything is masked.
    pub fn inf(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| !self.is_masked(*k))
            .fold(f64::INFINITY, |m, (_, v)| m.min(*v))
    }

    pub fn sup_abs(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| !self.is_masked(*k))
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
    }
}

/// A metric `e^{2(phi0 + phi)}(ds² + dθ²)`: a shared chart plus the dynamic
/// conformal factor.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricState {
    pub chart: Arc<ConformalChart>,
    pub phi: ScalarField,
}

impl MetricState {
    pub fn new(chart: Arc<ConformalChart>, phi: ScalarField) -> Result<Self> {
        phi.check_aligned(&chart)?;
        if let Some(k) = phi.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "phi is not finite at cell {:?}",
                chart.unflatten(k)
            )));
        }
        Ok(Self { chart, phi })
    }

    /// State with `phi ≡ 0`, so the metric is the chart's background.
    pub fn background(chart: ConformalChart) -> Self {
        let phi = ScalarField::zeros_like(&chart);
        Self {
            chart: Arc::new(chart),
            phi,
        }
    }

    /// Total log-conformal factor `Φ = phi0 + phi`.
    pub fn total_phi(&self) -> Vec<f64> {
        self.chart
            .phi0
            .iter()
            .zip(&self.phi.values)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.chart.shape()
    }

    /// Same chart with a different dynamic factor.
    pub fn with_phi(&self, phi: ScalarField) -> Result<Self> {
        Self::new(self.chart.clone(), phi)
    }

    /// Folds the dynamic factor into the background (`phi0 ← Φ`, `phi ← 0`).
    pub fn flattened(&self) -> Self {
        let mut chart = (*self.chart).clone();
        chart.phi0 = self.total_phi();
        Self::background(chart)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_validation_rejects_bad_input() {
        assert!(ConformalChart::flat(Topology::Strip, 8, 8, 0.0, 0.1).is_err());
        assert!(ConformalChart::flat(Topology::Strip, 3, 8, 0.1, 0.1).is_err());
        assert!(ConformalChart::new(Topology::Torus, 4, 4, 0.1, 0.1, vec![0.0; 15]).is_err());
        let mut phi0 = vec![0.0; 16];
        phi0[5] = f64::NAN;
        assert!(ConformalChart::new(Topology::Torus, 4, 4, 0.1, 0.1, phi0).is_err());
        assert!(ConformalChart::flat(Topology::Strip, 8, 8, 0.1, 0.1)
            .unwrap()
            .with_reference_curvature(1.0)
            .is_err());
    }

    #[test]
    fn trapezoid_weights_sum_to_the_domain_area() {
        let c = ConformalChart::flat(Topology::Rectangle, 11, 21, 0.1, 0.05).unwrap();
        let total: f64 = (0..11)
            .flat_map(|i| (0..21).map(move |j| (i, j)))
            .map(|(i, j)| c.cell_weight(i, j))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn misaligned_field_is_rejected() {
        let c = Arc::new(ConformalChart::flat(Topology::Torus, 8, 8, 0.1, 0.1).unwrap());
        let phi = ScalarField::new(8, 4, vec![0.0; 32]).unwrap();
        assert!(matches!(MetricState::new(c, phi), Err(Error::Alignment { .. })));
    }

    #[test]
    fn masked_cells_are_ignored_by_sup() {
        let c = ConformalChart::flat(Topology::Torus, 4, 4, 0.1, 0.1).unwrap();
        let mut f = ScalarField::zeros_like(&c);
        f.set(1, 1, 10.0);
        let f = f.with_masked_cell(1, 1);
        assert_eq!(f.sup(), 0.0);
    }
}
