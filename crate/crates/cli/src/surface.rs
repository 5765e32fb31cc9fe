//! Builds the initial metric of a scenario.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use ricci_core::collar::{build_eta, cusp_chart, cusp_end_curvature, eta_to_rho_chart, horocycle_turning, FermiBackground};
use ricci_core::elliptic::hyperbolic_green;
use ricci_core::flow::{perturb, Bump};
use ricci_core::geometry::io::{read_chart, read_field};
use ricci_core::geometry::surfaces::{cusp_funnel, flat_torus, funnel, hyperbolic_funnel};
use ricci_core::geometry::{ConformalChart, MetricState, Topology, WarpChart};

use crate::config::{Background, Scenario, Surface, SurfaceSpec};
use crate::{LabError, LabResult};

/// Closed-form distance on a funnel `dr² + w² cosh²(κr) dθ²`, which is the
/// hyperbolic funnel of waist `κw` scaled by `1/κ`. The nearest θ image is
/// used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunnelDistance {
    pub kappa: f64,
    pub waist: f64,
}

impl FunnelDistance {
    pub fn distance(&self, r1: f64, t1: f64, r2: f64, t2: f64) -> f64 {
        let mut dt = (t1 - t2).rem_euclid(2.0 * PI);
        if dt > PI {
            dt = 2.0 * PI - dt;
        }
        let (a, b) = (self.kappa * r1, self.kappa * r2);
        let ch = a.cosh() * b.cosh() * (self.kappa * self.waist * dt).cosh() - a.sinh() * b.sinh();
        ch.max(1.0).acosh() / self.kappa
    }

    /// Minimal Green's function of the full funnel: the hyperbolic-plane
    /// kernel summed over the images of the pole under the deck translation.
    /// Curvature scaling leaves a two-dimensional Green's function unchanged,
    /// so the kernel is evaluated at `κ·d`.
    pub fn green(&self, r1: f64, t1: f64, r2: f64, t2: f64) -> f64 {
        let base = (t1 - t2).rem_euclid(2.0 * PI);
        let term = |k: i64| {
            let dt = base + 2.0 * PI * k as f64;
            let (a, b) = (self.kappa * r1, self.kappa * r2);
            let ch = a.cosh() * b.cosh() * (self.kappa * self.waist * dt).cosh() - a.sinh() * b.sinh();
            hyperbolic_green(ch.max(1.0).acosh())
        };
        let mut sum = term(0) + term(-1);
        for k in 1.. {
            let t = term(k) + term(-1 - k);
            sum += t;
            if !(t > 1e-17 * sum) {
                break;
            }
        }
        sum
    }
}

/// The initial metric plus what the experiments need to know about it.
#[derive(Clone, Debug)]
pub struct Prepared {
    /// Initial metric, perturbation included.
    pub state: MetricState,
    /// Radial coordinate of every s row for warped surfaces.
    pub row_radius: Option<Vec<f64>>,
    /// Scalar curvature the surface is built to carry.
    pub curvature_target: Option<f64>,
    pub funnel_distance: Option<FunnelDistance>,
    /// `(χ, analytic ∫K + ∮k_g of the removed pieces)` when Gauss–Bonnet
    /// applies.
    pub gauss_bonnet: Option<(i64, f64)>,
}

/// Maps errors raised while building inputs to validation errors.
pub(crate) fn as_validation(e: ricci_core::Error) -> LabError {
    match e {
        ricci_core::Error::Io(io) => LabError::Validation(io.to_string()),
        other => LabError::Validation(other.to_string()),
    }
}

/// Collar background of the requested order.
pub fn background(b: &Background, order: usize, cap: usize, seed: u64) -> ricci_core::Result<FermiBackground> {
    match b {
        Background::Flat => FermiBackground::flat(order, cap),
        Background::DiscExterior => FermiBackground::disc_exterior(order, cap),
        Background::SineSquared => FermiBackground::sine_squared(order, cap),
        Background::Radial(c) => FermiBackground::radial(c, order, cap),
        Background::Random { modes, amplitude } => FermiBackground::random(seed, order, cap, *modes, *amplitude),
    }
}

fn from_warp(w: WarpChart, target: f64, distance: Option<FunnelDistance>) -> Prepared {
    Prepared {
        state: w.state,
        row_radius: Some(w.row_radius),
        curvature_target: Some(target),
        funnel_distance: distance,
        gauss_bonnet: None,
    }
}

/// The unperturbed surface of `sf`.
pub fn build(sf: &Surface, seed: u64) -> ricci_core::Result<Prepared> {
    let (n_s, n_t) = (sf.n_s, sf.n_theta);
    Ok(match &sf.spec {
        SurfaceSpec::Funnel { r_max, waist: None } => from_warp(
            funnel(*r_max, n_s, n_t)?,
            -1.0,
            Some(FunnelDistance { kappa: 1.0 / SQRT_2, waist: 1.0 }),
        ),
        SurfaceSpec::Funnel { r_max, waist: Some(w) } => from_warp(
            hyperbolic_funnel(*w, *r_max, n_s, n_t)?,
            -2.0,
            Some(FunnelDistance { kappa: 1.0, waist: *w }),
        ),
        SurfaceSpec::CuspFunnel { r_max } => from_warp(cusp_funnel(*r_max, n_s, n_t)?, -1.0, None),
        SurfaceSpec::FlatTorus { curvature, period_s, period_theta } => {
            let m = flat_torus(n_s, n_t, *period_s, *period_theta)?;
            let chart = (*m.chart).clone().with_reference_curvature(*curvature)?;
            Prepared {
                state: MetricState::background(chart),
                row_radius: None,
                curvature_target: Some(*curvature),
                funnel_distance: None,
                gauss_bonnet: Some((0, 0.0)),
            }
        }
        SurfaceSpec::Collar { background: b, order, modes, r_range } => {
            let bg = background(b, *order, *modes, seed)?;
            let eta = build_eta(&bg, *order)?;
            from_warp(eta_to_rho_chart(&eta, &bg, *r_range, n_s, n_t)?, -1.0, None)
        }
        SurfaceSpec::Cusp { rho_range } => Prepared {
            state: cusp_chart(*rho_range, n_s, n_t)?,
            row_radius: None,
            curvature_target: Some(-1.0),
            funnel_distance: None,
            gauss_bonnet: Some((0, cusp_end_curvature(rho_range.0)? + horocycle_turning(rho_range.1)?)),
        },
        SurfaceSpec::Chart { path, phi } => {
            let chart = read_chart(path)?;
            let closed = chart.topology == Topology::Torus;
            let state = match phi {
                None => MetricState::background(chart),
                Some(p) => custom_phi(chart, p)?,
            };
            Prepared {
                state,
                row_radius: None,
                curvature_target: None,
                funnel_distance: None,
                gauss_bonnet: closed.then_some((0, 0.0)),
            }
        }
    })
}

fn custom_phi(chart: ConformalChart, p: &Path) -> ricci_core::Result<MetricState> {
    let (header, field) = read_field(p)?;
    if (header.n_s, header.n_theta) != (chart.n_s, chart.n_theta) {
        return Err(ricci_core::Error::Alignment {
            expected: (chart.n_s, chart.n_theta),
            found: (header.n_s, header.n_theta),
        });
    }
    MetricState::new(std::sync::Arc::new(chart), field)
}

/// Builds the surface and applies the perturbation. Failures here are
/// reported as validation errors: nothing has been computed yet.
pub fn prepare(s: &Scenario) -> LabResult<Prepared> {
    let mut p = build(&s.surface, s.run.seed).map_err(as_validation)?;
    let pert = &s.perturbation;
    if pert.amplitude != 0.0 {
        let bump = Bump {
            amplitude: pert.amplitude,
            center: pert.center,
            width: pert.width,
        };
        p.state = perturb(&p.state, &bump).map_err(as_validation)?;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn funnel_distance_scales_with_curvature() {
        let hyp = FunnelDistance { kappa: 1.0, waist: 1.0 };
        assert!((hyp.distance(0.0, 0.0, 1.5, 0.0) - 1.5).abs() < 1e-12);
        let half = FunnelDistance { kappa: 1.0 / SQRT_2, waist: 1.0 };
        // Along a meridian the distance is |Δr| whatever κ is.
        assert!((half.distance(-1.0, 0.3, 2.0, 0.3) - 3.0).abs() < 1e-12);
        // On the waist circle it is w·|Δθ| for small angles.
        let d = half.distance(0.0, 0.0, 0.0, 1e-4);
        assert!((d / 1e-4 - 1.0).abs() < 1e-6);
        assert!((hyp.distance(0.0, 0.1, 0.0, 2.0 * PI - 0.1) - 0.2).abs() < 1e-9);
    }

    #[test]
    fn image_sum_matches_the_plane_kernel_for_wide_waists() {
        let wide = FunnelDistance { kappa: 1.0, waist: 3.0 };
        let d = wide.distance(0.2, 0.0, 1.1, 0.3);
        assert!((wide.green(0.2, 0.0, 1.1, 0.3) / hyperbolic_green(d) - 1.0).abs() < 1e-6);
        // The narrow default funnel picks up visible image contributions.
        let narrow = FunnelDistance { kappa: 1.0 / SQRT_2, waist: 1.0 };
        let d = narrow.distance(-1.5, 0.0, -1.5, 2.0);
        assert!(narrow.green(-1.5, 0.0, -1.5, 2.0) > 1.01 * hyperbolic_green(narrow.kappa * d));
        // Invariant under θ → θ + 2π.
        let g1 = narrow.green(0.3, 0.4, -0.2, 5.0);
        let g2 = narrow.green(0.3, 0.4 + 2.0 * PI, -0.2, 5.0);
        assert!((g1 - g2).abs() <= 1e-14 * g1);
    }

    #[test]
    fn surfaces_carry_their_curvature() {
        use ricci_core::geometry::scalar_curvature;
        let sf = Surface {
            spec: SurfaceSpec::Funnel { r_max: 4.0, waist: None },
            n_s: 64,
            n_theta: 32,
        };
        let p = build(&sf, 0).unwrap();
        let r = scalar_curvature(&p.state);
        assert!((r.get(32, 0) + 1.0).abs() < 1e-9);
        assert_eq!(p.row_radius.as_ref().unwrap().len(), 64);
        let torus = Surface {
            spec: SurfaceSpec::FlatTorus { curvature: 2.0, period_s: 1.0, period_theta: 1.0 },
            n_s: 32,
            n_theta: 32,
        };
        let p = build(&torus, 0).unwrap();
        assert!((scalar_curvature(&p.state).get(3, 4) - 2.0).abs() < 1e-12);
    }
}
