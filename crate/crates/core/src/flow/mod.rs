//! Normalized Ricci flow `∂g/∂t = (−1 − R)g` in conformal gauge.
//!
//! For `g = e^{2Φ}(ds² + dθ²)` the flow is the scalar PDE
//! `∂Φ/∂t = (−1 − R)/2`. It is integrated with classical RK4 under a
//! parabolic CFL limit; Dirichlet rows and columns stay pinned.

mod perturb;
mod stepper;
mod trajectory;

pub use perturb::{perturb, Bump};

pub use stepper::{Diagnostics, StateView};
pub use trajectory::{
    curvature_evolution_residual, decay_fit, decay_fit_series, write_diagnostics, BlowUp, DecayFit,
    FlowTrajectory, Snapshot, StepRecord,
};

use crate::geometry::{field_like, scalar_curvature, MetricState, ScalarField};
use crate::numeric::CompensatedSum;
use crate::{Error, Result};
use stepper::Stepper;

/// Default CFL safety factor.
pub const DEFAULT_CFL: f64 = 0.5;
/// `|R|` above which the flow is declared to have blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

/// Knobs for [`evolve_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub cfl_factor: f64,
    /// Use this step instead of the CFL limit (rejected if it exceeds it).
    pub fixed_dt: Option<f64>,
    /// Time between snapshot groups; `f64::INFINITY` keeps only `t = 0`.
    pub snapshot_every: f64,
    /// Steps between the three members of a snapshot group, which feed the
    /// central time differences of the residual checks.
    pub stencil_steps: usize,
    pub blowup_threshold: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            cfl_factor: DEFAULT_CFL,
            fixed_dt: None,
            snapshot_every: f64::INFINITY,
            stencil_steps: 8,
            blowup_threshold: BLOWUP_THRESHOLD,
        }
    }
}

/// Hooks run by the driver around every step, used to co-evolve quantities
/// on the exact step schedule of the flow.
pub trait StepObserver {
    fn before_step(&mut self, _state: &StateView<'_>) -> Result<()> {
        Ok(())
    }
    fn after_step(&mut self, _state: &StateView<'_>, _dt: f64) -> Result<()> {
        Ok(())
    }
    fn on_snapshot(&mut self, _state: &StateView<'_>, _snapshot: &Snapshot) -> Result<()> {
        Ok(())
    }
}

impl StepObserver for () {}

/// `(−1 − R)/2`.
pub fn flow_rhs(m: &MetricState) -> ScalarField {
    let r = scalar_curvature(m);
    field_like(&m.chart, r.values.iter().map(|v| 0.5 * (-1.0 - v)).collect())
}

/// `c·min(h)²·min e^{2Φ}/4` with the default factor.
pub fn cfl_limit(m: &MetricState) -> f64 {
    cfl_limit_with(m, DEFAULT_CFL)
}

pub fn cfl_limit_with(m: &MetricState, factor: f64) -> f64 {
    let c = &*m.chart;
    let h = c.h_s.min(c.h_theta);
    let min_phi = m.total_phi().into_iter().fold(f64::INFINITY, f64::min);
    factor * h * h * (2.0 * min_phi).exp() / 4.0
}

/// One RK4 step. Pinned rows are returned unchanged.
pub fn step(m: &MetricState, dt: f64) -> Result<MetricState> {
    let limit = cfl_limit(m);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let mut s = Stepper::new(m);
    s.advance(dt)?;
    Ok(s.state())
}

/// Evolves to time `T` with CFL-adaptive steps, snapshotting every
/// `snapshot_every`.
pub fn evolve(m0: &MetricState, t_end: f64, snapshot_every: f64) -> Result<FlowTrajectory> {
    let opts = EvolveOptions {
        snapshot_every,
        ..EvolveOptions::default()
    };
    evolve_with(m0, t_end, &opts)
}

pub fn evolve_with(m0: &MetricState, t_end: f64, opts: &EvolveOptions) -> Result<FlowTrajectory> {
    evolve_observed(m0, t_end, opts, &mut ())
}

pub fn evolve_observed(
    m0: &MetricState,
    t_end: f64,
    opts: &EvolveOptions,
    observer: &mut dyn StepObserver,
) -> Result<FlowTrajectory> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon T = {t_end} must be positive")));
    }
    if !(opts.cfl_factor > 0.0) || !(opts.snapshot_every > 0.0) {
        return Err(Error::InvalidArgument("CFL factor and snapshot cadence must be positive".into()));
    }
    drive(m0, t_end, opts, Schedule::Adaptive, observer)
}

/// Re-runs a trajectory on its recorded step schedule, checking that every
/// snapshot is reproduced bit for bit.
pub fn replay_observed(traj: &FlowTrajectory, observer: &mut dyn StepObserver) -> Result<FlowTrajectory> {
    let out = drive(&traj.initial, traj.horizon, &traj.options, Schedule::Replay(traj), observer)?;
    if out.snapshots.len() != traj.snapshots.len()
        || out.snapshots.iter().zip(&traj.snapshots).any(|(a, b)| a != b)
    {
        return Err(Error::TrajectoryMismatch("replayed snapshots differ from the recording".into()));
    }
    Ok(out)
}

enum Schedule<'a> {
    Adaptive,
    Replay(&'a FlowTrajectory),
}

fn drive(
    m0: &MetricState,
    t_end: f64,
    opts: &EvolveOptions,
    schedule: Schedule<'_>,
    observer: &mut dyn StepObserver,
) -> Result<FlowTrajectory> {
    let mut stepper = Stepper::new(m0);
    let eps = 1e-12 * t_end.max(1.0);
    let mut clock = CompensatedSum::new(0.0);
    let mut t = 0.0;
    let mut n = 0usize;
    let mut last_dt = 0.0;
    let mut records = Vec::new();
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut followers: Vec<(usize, usize, usize)> = Vec::new();
    let mut group = 0usize;
    let mut next_snap = 0.0;
    let mut blowup = None;

    loop {
        let diag = stepper.diagnose();
        records.push(StepRecord { t, dt: last_dt, diag });
        if !(diag.sup_abs_r <= opts.blowup_threshold) {
            blowup = Some(BlowUp {
                t,
                step: n,
                sup_abs_r: diag.sup_abs_r,
            });
            break;
        }

        let mut wanted: Vec<(usize, usize)> = Vec::new();
        match schedule {
            Schedule::Adaptive => {
                if t >= next_snap - eps {
                    wanted.push((group, 0));
                    for off in 1..=2 {
                        followers.push((n + off * opts.stencil_steps.max(1), group, off));
                    }
                    group += 1;
                    next_snap = group as f64 * opts.snapshot_every;
                }
                followers.retain(|&(due, g, off)| {
                    if due == n {
                        wanted.push((g, off));
                        false
                    } else {
                        true
                    }
                });
            }
            Schedule::Replay(tr) => {
                wanted.extend(tr.snapshots.iter().filter(|s| s.step == n).map(|s| (s.group, s.offset)));
            }
        }
        if !wanted.is_empty() {
            let state = stepper.state();
            for (g, off) in wanted {
                let snap = Snapshot {
                    t,
                    step: n,
                    group: g,
                    offset: off,
                    state: state.clone(),
                };
                observer.on_snapshot(&stepper.view(), &snap)?;
                snapshots.push(snap);
            }
        }

        let dt = match schedule {
            Schedule::Adaptive => {
                if t >= t_end - eps {
                    break;
                }
                let limit = stepper.cfl_limit(opts.cfl_factor);
                let mut dt = match opts.fixed_dt {
                    Some(f) if f > limit * (1.0 + 1e-12) => return Err(Error::CflViolation { dt: f, limit }),
                    Some(f) => f,
                    None => limit,
                };
                let target = next_snap.min(t_end);
                let mut land = None;
                if t + dt >= target - eps {
                    dt = target - t;
                    land = Some(target);
                }
                (dt, land)
            }
            Schedule::Replay(tr) => {
                if n + 1 >= tr.records.len() {
                    break;
                }
                let rec = &tr.records[n + 1];
                (rec.dt, Some(rec.t))
            }
        };
        let (dt, land) = dt;

        observer.before_step(&stepper.view())?;
        if let Err(e) = stepper.advance(dt) {
            match e {
                Error::NonFinite { .. } => {
                    blowup = Some(BlowUp {
                        t,
                        step: n,
                        sup_abs_r: f64::INFINITY,
                    });
                    break;
                }
                other => return Err(other),
            }
        }
        n += 1;
        last_dt = dt;
        match land {
            Some(target) => {
                clock = CompensatedSum::new(target);
                t = target;
            }
            None => {
                clock.add(dt);
                t = clock.value();
            }
        }
        observer.after_step(&stepper.view(), dt)?;
    }

    Ok(FlowTrajectory {
        initial: m0.clone(),
        horizon: t_end,
        options: *opts,
        records,
        snapshots,
        final_state: stepper.state(),
        blowup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::surfaces::{flat_torus, funnel, homogeneous_torus, sphere_band};
    use crate::geometry::{ConformalChart, Topology};

    #[test]
    fn rhs_examples() {
        let w = funnel(6.0, 64, 8).unwrap();
        let rhs = flow_rhs(&w.state);
        for i in 1..63 {
            assert!(rhs.get(i, 0).abs() < 1e-10);
        }
        let flat = flat_torus(8, 8, 1.0, 1.0).unwrap();
        assert!(flow_rhs(&flat).values.iter().all(|v| *v == -0.5));
        let sphere = sphere_band(0.3, 128, 8).unwrap();
        let rhs = flow_rhs(&sphere.state);
        for i in 1..127 {
            assert!((rhs.get(i, 0) + 1.5).abs() < 5e-3, "{}", rhs.get(i, 0));
        }
    }

    #[test]
    fn cfl_examples() {
        let c = ConformalChart::flat(Topology::Torus, 10, 10, 0.1, 0.1).unwrap();
        let m = MetricState::background(c.clone());
        assert!((cfl_limit(&m) - 0.00125).abs() < 1e-15);
        let fine = MetricState::background(ConformalChart::flat(Topology::Torus, 20, 20, 0.05, 0.05).unwrap());
        assert!((cfl_limit(&fine) * 4.0 - cfl_limit(&m)).abs() < 1e-15);
        let mut scaled = c;
        scaled.phi0.fill(2f64.ln());
        let scaled = MetricState::background(scaled);
        assert!((cfl_limit(&scaled) / cfl_limit(&m) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn step_rejects_large_dt_and_keeps_pins() {
        let w = funnel(6.0, 64, 8).unwrap();
        let limit = cfl_limit(&w.state);
        assert!(matches!(step(&w.state, 2.0 * limit), Err(Error::CflViolation { .. })));
        let next = step(&w.state, limit).unwrap();
        let diff = next
            .phi
            .values
            .iter()
            .zip(&w.state.phi.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-8);
        for j in 0..8 {
            assert_eq!(next.phi.get(0, j), w.state.phi.get(0, j));
            assert_eq!(next.phi.get(63, j), w.state.phi.get(63, j));
        }
    }

    fn ode(r0: f64, t: f64) -> f64 {
        r0 * t.exp() / (1.0 + r0 - r0 * t.exp())
    }

    #[test]
    fn homogeneous_decay_follows_ode() {
        let m = homogeneous_torus(16, -0.5).unwrap();
        let traj = evolve(&m, 2.0, 0.5).unwrap();
        assert!(traj.blowup.is_none());
        let mut prev = -0.5;
        for rec in &traj.records {
            let r = rec.diag.inf_r_plus_1 - 1.0;
            assert!((r - ode(-0.5, rec.t)).abs() < 1e-9, "t={} r={r}", rec.t);
            assert!(r <= prev + 1e-15);
            prev = r;
        }
        assert!((traj.final_time() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_blowup_time() {
        let m = homogeneous_torus(8, 2.0).unwrap();
        let traj = evolve(&m, 1.0, 1.0).unwrap();
        let b = traj.blowup.expect("blow-up expected");
        assert!(b.t > 0.40 && b.t < 0.41, "{}", b.t);
    }

    #[test]
    fn snapshot_groups_are_complete_and_timed() {
        let m = homogeneous_torus(8, -0.5).unwrap();
        let opts = EvolveOptions {
            snapshot_every: 0.25,
            stencil_steps: 3,
            ..EvolveOptions::default()
        };
        let traj = evolve_with(&m, 1.0, &opts).unwrap();
        let mains: Vec<f64> = traj.snapshots.iter().filter(|s| s.offset == 0).map(|s| s.t).collect();
        assert_eq!(mains, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(traj.snapshot_groups().count(), 4);
        for w in traj.records.windows(2) {
            assert!(w[1].t > w[0].t && w[1].dt > 0.0);
        }
    }

    #[test]
    fn replay_is_bitwise() {
        let m = homogeneous_torus(8, -0.5).unwrap();
        let opts = EvolveOptions {
            snapshot_every: 0.1,
            ..EvolveOptions::default()
        };
        let traj = evolve_with(&m, 0.3, &opts).unwrap();
        let again = replay_observed(&traj, &mut ()).unwrap();
        assert_eq!(again.records, traj.records);
        assert_eq!(again.final_state, traj.final_state);
    }
}

