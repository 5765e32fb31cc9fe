//! The Poisson potential `Δ_t u = R + 1` carried along the flow, Hamilton's
//! potential `H = R + 1 + |∇u|²` and the monitors built on them.

use super::solver::{split_solve_signed_with, SolveOptions};
use crate::flow::{evolve_observed, replay_observed, EvolveOptions, FlowTrajectory, Snapshot, StateView, StepObserver};
use crate::geometry::{
    field_like, geodesic_distance, grad_norm_sq, integrate, laplace_beltrami, scalar_curvature,
    traceless_hessian_norm_sq, ConformalChart, Edge, GridIndex, MetricState, ScalarField,
};
use crate::numeric::three_point_derivative;
use crate::{Error, Result};

/// Solver tolerance for the initial potential.
pub const POTENTIAL_SOLVER_TOL: f64 = 1e-11;
/// Gaussian rate of the growth-weighted monitors.
pub const GROWTH_RATE: f64 = 1.0;

/// Fields recorded at one flow snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSnapshot {
    pub t: f64,
    pub step: usize,
    pub group: usize,
    pub offset: usize,
    pub u: ScalarField,
    pub grad_sq: ScalarField,
    pub lap_u: ScalarField,
    pub h: ScalarField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialTrack {
    pub snapshots: Vec<PotentialSnapshot>,
    /// Gaussian rate `a` used by the growth monitors.
    pub growth_a: f64,
    /// `b = sup_t sup |u|`, the bound paired with `a`.
    pub growth_b: f64,
}

impl PotentialTrack {
    pub fn main_snapshots(&self) -> impl Iterator<Item = &PotentialSnapshot> + '_ {
        self.snapshots.iter().filter(|s| s.offset == 0)
    }

    /// Complete groups of three, ordered by group.
    pub fn groups(&self) -> impl Iterator<Item = [&PotentialSnapshot; 3]> + '_ {
        let n = self.snapshots.iter().map(|s| s.group).max().map_or(0, |g| g + 1);
        (0..n).filter_map(move |g| {
            let find = |o| self.snapshots.iter().find(|s| s.group == g && s.offset == o);
            Some([find(0)?, find(1)?, find(2)?])
        })
    }
}

/// `R + 1 + |∇u|²`.
pub fn hamilton_potential(m: &MetricState, u: &ScalarField) -> Result<ScalarField> {
    let r = scalar_curvature(m);
    let g = grad_norm_sq(u, m)?;
    r.zip_with(&g, |r, g| r + 1.0 + g)
}

/// `u₀` with `Δu₀ = R + 1` and zero Dirichlet values, via the signed split.
pub fn initial_potential(m: &MetricState) -> Result<ScalarField> {
    let rp1 = scalar_curvature(m).map(|r| r + 1.0);
    split_solve_signed_with(m, &rp1, &SolveOptions::with_tol(POTENTIAL_SOLVER_TOL))
}

/// RK4 integrator of `∂u/∂t = Δ_t u − u` driven by externally supplied
/// weights `e^{−2Φ}`. Pinned cells keep their values.
pub(crate) struct HeatStepper {
    n_s: usize,
    nt: usize,
    is: f64,
    it: f64,
    s_per: bool,
    t_per: bool,
    pub(crate) u: Vec<f64>,
    tmp: Vec<f64>,
    k: Vec<f64>,
    acc: Vec<f64>,
    w_mid: Vec<f64>,
}

impl HeatStepper {
    pub(crate) fn new(c: &ConformalChart, u0: &[f64]) -> Self {
        let n = c.len();
        Self {
            n_s: c.n_s,
            nt: c.n_theta,
            is: 1.0 / (c.h_s * c.h_s),
            it: 1.0 / (c.h_theta * c.h_theta),
            s_per: c.topology.s_edge() == Edge::Periodic,
            t_per: c.topology.theta_edge() == Edge::Periodic,
            u: u0.to_vec(),
            tmp: vec![0.0; n],
            k: vec![0.0; n],
            acc: vec![0.0; n],
            w_mid: vec![0.0; n],
        }
    }

    /// `out = w·L v − v` on active cells, zero on pinned ones.
    fn rhs(&self, w: &[f64], v: &[f64], out: &mut [f64]) {
        let (n, nt) = (self.n_s, self.nt);
        for i in 0..n {
            let row = &mut out[i * nt..(i + 1) * nt];
            if !self.s_per && (i == 0 || i + 1 == n) {
                row.fill(0.0);
                continue;
            }
            let up = &v[((i + 1) % n) * nt..((i + 1) % n + 1) * nt];
            let dn = &v[((i + n - 1) % n) * nt..((i + n - 1) % n + 1) * nt];
            let c = &v[i * nt..(i + 1) * nt];
            let wr = &w[i * nt..(i + 1) * nt];
            for j in 1..nt - 1 {
                let lap = (up[j] + dn[j] - 2.0 * c[j]) * self.is + (c[j - 1] + c[j + 1] - 2.0 * c[j]) * self.it;
                row[j] = wr[j] * lap - c[j];
            }
            if self.t_per {
                for j in [0, nt - 1] {
                    let (l, r) = (c[(j + nt - 1) % nt], c[(j + 1) % nt]);
                    let lap = (up[j] + dn[j] - 2.0 * c[j]) * self.is + (l + r - 2.0 * c[j]) * self.it;
                    row[j] = wr[j] * lap - c[j];
                }
            } else {
                row[0] = 0.0;
                row[nt - 1] = 0.0;
            }
        }
    }

    /// One RK4 step with weights `w0` at the start and `w1` at the end; the
    /// midpoint weight is their geometric mean.
    pub(crate) fn step(&mut self, w0: &[f64], w1: &[f64], dt: f64) {
        for ((m, a), b) in self.w_mid.iter_mut().zip(w0).zip(w1) {
            *m = (a * b).sqrt();
        }
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        let w_mid = std::mem::take(&mut self.w_mid);
        self.rhs(w0, &self.u, &mut k);
        for q in 0..k.len() {
            self.acc[q] = k[q];
            tmp[q] = self.u[q] + 0.5 * dt * k[q];
        }
        self.rhs(&w_mid, &tmp, &mut k);
        for q in 0..k.len() {
            self.acc[q] += 2.0 * k[q];
            tmp[q] = self.u[q] + 0.5 * dt * k[q];
        }
        self.rhs(&w_mid, &tmp, &mut k);
        for q in 0..k.len() {
            self.acc[q] += 2.0 * k[q];
            tmp[q] = self.u[q] + dt * k[q];
        }
        self.rhs(w1, &tmp, &mut k);
        for q in 0..k.len() {
            self.u[q] += dt / 6.0 * (self.acc[q] + k[q]);
        }
        self.k = k;
        self.tmp = tmp;
        self.w_mid = w_mid;
    }
}

fn record(state: &MetricState, snap_meta: (f64, usize, usize, usize), u: ScalarField) -> Result<PotentialSnapshot> {
    let grad_sq = grad_norm_sq(&u, state)?;
    let lap_u = laplace_beltrami(&u, state)?;
    let h = hamilton_potential(state, &u)?;
    let (t, step, group, offset) = snap_meta;
    Ok(PotentialSnapshot {
        t,
        step,
        group,
        offset,
        u,
        grad_sq,
        lap_u,
        h,
    })
}

struct PotentialObserver {
    heat: HeatStepper,
    w_prev: Vec<f64>,
    snapshots: Vec<PotentialSnapshot>,
}

impl StepObserver for PotentialObserver {
    fn before_step(&mut self, state: &StateView<'_>) -> Result<()> {
        self.w_prev.copy_from_slice(state.weight);
        Ok(())
    }

    fn after_step(&mut self, state: &StateView<'_>, dt: f64) -> Result<()> {
        self.heat.step(&self.w_prev, state.weight, dt);
        if self.heat.u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { dt });
        }
        Ok(())
    }

    fn on_snapshot(&mut self, _state: &StateView<'_>, s: &Snapshot) -> Result<()> {
        let u = field_like(&s.state.chart, self.heat.u.clone());
        self.snapshots.push(record(&s.state, (s.t, s.step, s.group, s.offset), u)?);
        Ok(())
    }
}

impl PotentialObserver {
    fn new(m0: &MetricState, u0: &ScalarField) -> Result<Self> {
        u0.check_aligned(&m0.chart)?;
        Ok(Self {
            heat: HeatStepper::new(&m0.chart, &u0.values),
            w_prev: vec![0.0; m0.chart.len()],
            snapshots: Vec::new(),
        })
    }

    fn finish(self) -> PotentialTrack {
        let growth_b = self.snapshots.iter().map(|s| s.u.sup_abs()).fold(0.0, f64::max);
        PotentialTrack {
            snapshots: self.snapshots,
            growth_a: GROWTH_RATE,
            growth_b,
        }
    }
}

/// Co-evolves `u` on the recorded step schedule of `traj` (which is replayed
/// and must reproduce bit for bit).
pub fn heat_evolve_potential(traj: &FlowTrajectory, u0: &ScalarField) -> Result<PotentialTrack> {
    let mut obs = PotentialObserver::new(&traj.initial, u0)?;
    replay_observed(traj, &mut obs)?;
    Ok(obs.finish())
}

/// Runs the flow and the potential together from `u₀ = initial_potential(m0)`.
pub fn evolve_with_potential(
    m0: &MetricState,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<(FlowTrajectory, PotentialTrack)> {
    let u0 = initial_potential(m0)?;
    let mut obs = PotentialObserver::new(m0, &u0)?;
    let traj = evolve_observed(m0, t_end, opts, &mut obs)?;
    Ok((traj, obs.finish()))
}

/// Evolves `∂u/∂t = Δu − u` on a fixed metric with steps of at most `dt`,
/// returning `u` at every multiple of `every` up to `t_end`.
pub fn heat_evolve_frozen(
    m: &MetricState,
    u0: &ScalarField,
    t_end: f64,
    dt: f64,
    every: f64,
) -> Result<Vec<(f64, ScalarField)>> {
    u0.check_aligned(&m.chart)?;
    if !(dt > 0.0 && every > 0.0 && t_end > 0.0) {
        return Err(Error::InvalidArgument("times must be positive".into()));
    }
    let w: Vec<f64> = m.total_phi().iter().map(|p| (-2.0 * p).exp()).collect();
    let mut heat = HeatStepper::new(&m.chart, &u0.values);
    let mut out = vec![(0.0, u0.clone())];
    let n_out = (t_end / every + 1e-9).floor() as usize;
    for q in 1..=n_out {
        let t0 = (q - 1) as f64 * every;
        let t1 = (q as f64 * every).min(t_end);
        let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
        let h = (t1 - t0) / steps as f64;
        for _ in 0..steps {
            heat.step(&w, &w, h);
        }
        out.push((t1, field_like(&m.chart, heat.u.clone())));
    }
    Ok(out)
}

fn check_pairing(traj: &FlowTrajectory, track: &PotentialTrack) -> Result<()> {
    let same = traj.snapshots.len() == track.snapshots.len()
        && traj
            .snapshots
            .iter()
            .zip(&track.snapshots)
            .all(|(a, b)| a.step == b.step && a.group == b.group && a.offset == b.offset);
    if same {
        Ok(())
    } else {
        Err(Error::TrajectoryMismatch("potential track does not follow the trajectory's snapshots".into()))
    }
}

/// `Δ_t u − R − 1` at one snapshot, masked outside cells two away from
/// every pinned edge.
pub fn consistency_field(state: &MetricState, p: &PotentialSnapshot) -> Result<ScalarField> {
    let r = scalar_curvature(state);
    let mut f = p.lap_u.zip_with(&r, |l, r| l - r - 1.0)?;
    mask_outside(&state.chart, &mut f, 2);
    Ok(f)
}

fn mask_outside(c: &ConformalChart, f: &mut ScalarField, margin: usize) {
    let mask = f.mask.get_or_insert_with(|| vec![false; c.len()]);
    for i in 0..c.n_s {
        for j in 0..c.n_theta {
            if !c.is_interior(i, j, margin) {
                mask[c.index(i, j)] = true;
            }
        }
    }
}

/// `max |Δ_t u − (R + 1)|` over snapshots and interior cells.
pub fn potential_consistency(traj: &FlowTrajectory, track: &PotentialTrack) -> Result<f64> {
    check_pairing(traj, track)?;
    let mut worst = 0.0f64;
    for (s, p) in traj.snapshots.iter().zip(&track.snapshots) {
        worst = worst.max(consistency_field(&s.state, p)?.sup_abs());
    }
    Ok(worst)
}

/// `max |∂H/∂t − ΔH + 2|M|² + H|` at the middle member of each snapshot group.
pub fn hamilton_evolution_residual(traj: &FlowTrajectory, track: &PotentialTrack) -> Result<f64> {
    check_pairing(traj, track)?;
    let mut worst: Option<f64> = None;
    for ([a, b, c], [sa, sb, sc]) in track.groups().zip(traj.snapshot_groups()) {
        let state = &sb.state;
        debug_assert!(sa.step == a.step && sc.step == c.step);
        let lap_h = laplace_beltrami(&b.h, state)?;
        let m2 = traceless_hessian_norm_sq(&b.u, state)?;
        let chart = &*state.chart;
        let times = [a.t, b.t, c.t];
        let mut w = worst.unwrap_or(0.0);
        for i in 0..chart.n_s {
            for j in 0..chart.n_theta {
                if !chart.is_interior(i, j, 3) {
                    continue;
                }
                let k = chart.index(i, j);
                let dh = three_point_derivative(times, [a.h.values[k], b.h.values[k], c.h.values[k]]);
                w = w.max((dh - lap_h.values[k] + 2.0 * m2.values[k] + b.h.values[k]).abs());
            }
        }
        worst = Some(w);
    }
    worst.ok_or_else(|| Error::Precondition("trajectory has no complete snapshot group".into()))
}

/// A field at time `t` on the metric of that time.
#[derive(Clone, Copy, Debug)]
pub struct TimedField<'a> {
    pub t: f64,
    pub field: &'a ScalarField,
    pub state: &'a MetricState,
}

/// `Σ_t dt · ∫ e^{−a r_t²} (f₊)² dV_t` with `r_t` the distance from `o` at
/// time `t` and `dt` the gap to the next sample (left Riemann sum).
pub fn growth_weighted_norm(fields: &[TimedField<'_>], a: f64, o: GridIndex) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("growth rate a = {a} must be positive")));
    }
    let mut total = 0.0;
    for (q, f) in fields.iter().enumerate() {
        let Some(next) = fields.get(q + 1) else { break };
        let dt = next.t - f.t;
        if !(dt >= 0.0) {
            return Err(Error::InvalidArgument("fields must be ordered in time".into()));
        }
        let r = geodesic_distance(f.state, o)?;
        let integrand = f.field.zip_with(&r, |v, r| {
            let p = v.max(0.0);
            (-a * r * r).exp() * p * p
        })?;
        total += dt * integrate(&integrand, f.state)?;
    }
    Ok(total)
}

/// Growth-weighted norms of the `u`, `|∇u|` and `Δu` tracks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthNorms {
    pub u: f64,
    pub grad: f64,
    pub lap: f64,
}

impl GrowthNorms {
    pub fn all_finite(&self) -> bool {
        self.u.is_finite() && self.grad.is_finite() && self.lap.is_finite()
    }
}

/// [`growth_weighted_norm`] of `|u|`, `|∇u|` and `|Δu|` over main snapshots.
pub fn track_growth_norms(traj: &FlowTrajectory, track: &PotentialTrack, o: GridIndex) -> Result<GrowthNorms> {
    check_pairing(traj, track)?;
    let pairs: Vec<(&Snapshot, &PotentialSnapshot)> =
        traj.snapshots.iter().zip(&track.snapshots).filter(|(s, _)| s.offset == 0).collect();
    let abs_u: Vec<ScalarField> = pairs.iter().map(|(_, p)| p.u.map(f64::abs)).collect();
    let grad: Vec<ScalarField> = pairs.iter().map(|(_, p)| p.grad_sq.map(f64::sqrt)).collect();
    let lap: Vec<ScalarField> = pairs.iter().map(|(_, p)| p.lap_u.map(f64::abs)).collect();
    let norm = |fs: &[ScalarField]| {
        let timed: Vec<TimedField<'_>> = pairs
            .iter()
            .zip(fs)
            .map(|((s, _), f)| TimedField {
                t: s.t,
                field: f,
                state: &s.state,
            })
            .collect();
        growth_weighted_norm(&timed, track.growth_a, o)
    };
    Ok(GrowthNorms {
        u: norm(&abs_u)?,
        grad: norm(&grad)?,
        lap: norm(&lap)?,
    })
}

/// True iff `sup f(·, t) ≤ tol` at every time. The first sample must already
/// satisfy it.
pub fn maxprinciple_monitor(fields: &[(f64, ScalarField)], tol: f64) -> Result<bool> {
    let Some((t0, f0)) = fields.first() else {
        return Err(Error::InvalidArgument("no fields to monitor".into()));
    };
    if f0.sup() > tol {
        return Err(Error::Precondition(format!(
            "monitored field starts above tolerance at t = {t0}: {} > {tol:e}",
            f0.sup()
        )));
    }
    Ok(fields.iter().all(|(_, f)| f.sup() <= tol))
}

/// `H − sup H(0)·e^{−t}` over active cells at every main snapshot.
pub fn h_envelope_fields(track: &PotentialTrack, chart: &ConformalChart) -> Vec<(f64, ScalarField)> {
    let mut main = track.main_snapshots();
    let Some(first) = main.next() else { return Vec::new() };
    let mut h0 = first.h.clone();
    mask_outside(chart, &mut h0, 1);
    let sup0 = h0.sup();
    std::iter::once(first)
        .chain(main)
        .map(|p| {
            let env = sup0 * (-p.t).exp();
            let mut f = p.h.map(|h| h - env);
            mask_outside(chart, &mut f, 1);
            (p.t, f)
        })
        .collect()
}

/// `±(Δ_t u − R − 1)` at every main snapshot.
pub fn consistency_fields(traj: &FlowTrajectory, track: &PotentialTrack, sign: f64) -> Result<Vec<(f64, ScalarField)>> {
    check_pairing(traj, track)?;
    traj.snapshots
        .iter()
        .zip(&track.snapshots)
        .filter(|(s, _)| s.offset == 0)
        .map(|(s, p)| Ok((s.t, consistency_field(&s.state, p)?.map(|v| sign * v))))
        .collect()
}

/// Per-snapshot summary: `t, sup_H, sup_absU, consistency_err`.
pub fn track_summary(traj: &FlowTrajectory, track: &PotentialTrack) -> Result<Vec<[f64; 4]>> {
    check_pairing(traj, track)?;
    traj.snapshots
        .iter()
        .zip(&track.snapshots)
        .filter(|(s, _)| s.offset == 0)
        .map(|(s, p)| {
            let mut h = p.h.clone();
            mask_outside(&s.state.chart, &mut h, 1);
            Ok([s.t, h.sup(), p.u.sup_abs(), consistency_field(&s.state, p)?.sup_abs()])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::evolve_with;
    use crate::geometry::surfaces::funnel;
    use crate::geometry::{volume, Topology};
    use std::f64::consts::PI;

    fn opts(every: f64) -> EvolveOptions {
        EvolveOptions {
            snapshot_every: every,
            ..EvolveOptions::default()
        }
    }

    #[test]
    fn hyperbolic_funnel_has_zero_potential() {
        let w = funnel(4.0, 32, 8).unwrap();
        let (traj, track) = evolve_with_potential(&w.state, 0.2, &opts(0.1)).unwrap();
        assert!(track.snapshots.iter().all(|p| p.u.sup_abs() < 1e-9));
        assert!(potential_consistency(&traj, &track).unwrap() <= 1e-8);
        assert!(hamilton_evolution_residual(&traj, &track).unwrap() <= 1e-6);
        let h = hamilton_potential(&w.state, &ScalarField::zeros_like(&w.state.chart)).unwrap();
        for i in 1..31 {
            assert!(h.get(i, 0).abs() < 1e-9);
        }
    }

    #[test]
    fn replayed_potential_matches_coevolved() {
        let w = funnel(4.0, 32, 8).unwrap();
        let m = w.state.with_phi(ScalarField::from_fn(&w.state.chart, |s, _| 0.05 * (-s * s).exp())).unwrap();
        let (traj, track) = evolve_with_potential(&m, 0.1, &opts(0.05)).unwrap();
        let u0 = initial_potential(&m).unwrap();
        let again = heat_evolve_potential(&traj, &u0).unwrap();
        assert_eq!(track, again);
        let other = evolve_with(&m, 0.05, &opts(0.05)).unwrap();
        assert!(potential_consistency(&other, &track).is_err());
    }

    #[test]
    fn frozen_mode_decays_faster_than_unit_rate() {
        let c = ConformalChart::flat(Topology::Strip, 33, 16, PI / 32.0, 2.0 * PI / 16.0).unwrap();
        let m = MetricState::background(c);
        let u0 = ScalarField::from_fn(&m.chart, |s, _| s.sin());
        let out = heat_evolve_frozen(&m, &u0, 1.0, 1e-3, 0.25).unwrap();
        for (t, u) in &out[1..] {
            assert!(u.sup_abs() <= (-t).exp() * u0.sup_abs());
            let rate2 = (-2.0 * t).exp();
            assert!((u.sup_abs() - rate2).abs() < 1e-3, "{t}");
        }
    }

    #[test]
    fn hamilton_dominates_curvature() {
        let w = funnel(4.0, 32, 8).unwrap();
        let m = w.state.with_phi(ScalarField::from_fn(&w.state.chart, |s, t| 0.1 * (-s * s).exp() * (1.0 + 0.3 * t.cos()))).unwrap();
        let u = initial_potential(&m).unwrap();
        let h = hamilton_potential(&m, &u).unwrap();
        let r = scalar_curvature(&m);
        for k in 0..h.values.len() {
            assert!(h.values[k] >= r.values[k] + 1.0);
        }
    }

    #[test]
    fn growth_norm_examples() {
        let c = ConformalChart::flat(Topology::Rectangle, 121, 121, 0.05, 0.05)
            .unwrap()
            .with_origin(-3.0, -3.0);
        let m = MetricState::background(c);
        let one = ScalarField::constant(&m.chart, 1.0);
        let neg = ScalarField::constant(&m.chart, -1.0);
        let times: Vec<f64> = (0..=4).map(|k| 0.5 * k as f64).collect();
        fn timed<'a>(times: &[f64], f: &'a ScalarField, m: &'a MetricState) -> Vec<TimedField<'a>> {
            times.iter().map(|&t| TimedField { t, field: f, state: m }).collect()
        }
        assert_eq!(growth_weighted_norm(&timed(&times, &neg, &m), 1.0, (60, 60)).unwrap(), 0.0);
        let v1 = growth_weighted_norm(&timed(&times, &one, &m), 1.0, (60, 60)).unwrap();
        let exact = 2.0 * PI * (1.0 - (-9.0f64).exp()) / 2.0;
        assert!((v1 / 2.0 - exact).abs() < 0.02 * exact, "{v1}");
        let v2 = growth_weighted_norm(&timed(&times, &one, &m), 2.0, (60, 60)).unwrap();
        assert!(v2 < v1);
        assert!(volume(&m) > 0.0);
    }

    #[test]
    fn monitor_examples() {
        let c = ConformalChart::flat(Topology::Strip, 8, 4, 0.1, 0.1).unwrap();
        let neg = ScalarField::constant(&c, -1.0);
        let pos = ScalarField::constant(&c, 1.0);
        assert!(maxprinciple_monitor(&[(0.0, neg.clone()), (1.0, neg.clone())], 0.0).unwrap());
        assert!(!maxprinciple_monitor(&[(0.0, neg.clone()), (1.0, pos.clone())], 0.0).unwrap());
        assert!(maxprinciple_monitor(&[(0.0, pos)], 0.0).is_err());
    }
}
