//! Recorded flow runs and the checks computed from them.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::{Diagnostics, EvolveOptions};
use crate::geometry::io::format_float;
use crate::geometry::{laplace_beltrami, scalar_curvature, MetricState};
use crate::numeric::{fit_line, three_point_derivative};
use crate::{Error, Result};

/// Diagnostics of the state at time `t`; `dt` is the step that produced it
/// (zero for the initial state).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub diag: Diagnostics,
}

/// Stored state. Snapshots come in groups of three (`offset` 0, 1, 2) a fixed
/// number of steps apart.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub group: usize,
    pub offset: usize,
    pub state: MetricState,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlowUp {
    pub t: f64,
    pub step: usize,
    pub sup_abs_r: f64,
}

#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub initial: MetricState,
    pub horizon: f64,
    pub options: EvolveOptions,
    /// One record per state, starting with `t = 0`.
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: MetricState,
    /// Set when the run was truncated by curvature blow-up.
    pub blowup: Option<BlowUp>,
}

impl FlowTrajectory {
    pub fn final_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    pub fn is_truncated(&self) -> bool {
        self.blowup.is_some()
    }

    pub fn steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Complete snapshot groups, ordered by group.
    pub fn snapshot_groups(&self) -> impl Iterator<Item = [&Snapshot; 3]> + '_ {
        let groups = self.snapshots.iter().map(|s| s.group).max().map_or(0, |g| g + 1);
        (0..groups).filter_map(move |g| {
            let find = |off| self.snapshots.iter().find(|s| s.group == g && s.offset == off);
            Some([find(0)?, find(1)?, find(2)?])
        })
    }

    /// Main (`offset == 0`) snapshots in time order.
    pub fn main_snapshots(&self) -> impl Iterator<Item = &Snapshot> + '_ {
        self.snapshots.iter().filter(|s| s.offset == 0)
    }
}

/// Max over complete snapshot groups and interior cells of
/// `|∂R/∂t − ΔR − R(R + 1)|` at the middle member of each group.
pub fn curvature_evolution_residual(traj: &FlowTrajectory) -> Result<f64> {
    let mut worst: Option<f64> = None;
    for [a, b, c] in traj.snapshot_groups() {
        let ra = scalar_curvature(&a.state);
        let rb = scalar_curvature(&b.state);
        let rc = scalar_curvature(&c.state);
        let lap = laplace_beltrami(&rb, &b.state)?;
        let chart = &*b.state.chart;
        let times = [a.t, b.t, c.t];
        let mut w = worst.unwrap_or(0.0);
        for i in 0..chart.n_s {
            for j in 0..chart.n_theta {
                if !chart.is_interior(i, j, 2) {
                    continue;
                }
                let k = chart.index(i, j);
                let dr = three_point_derivative(times, [ra.values[k], rb.values[k], rc.values[k]]);
                let r = rb.values[k];
                w = w.max((dr - lap.values[k] - r * (r + 1.0)).abs());
            }
        }
        worst = Some(w);
    }
    worst.ok_or_else(|| Error::Precondition("trajectory has no complete snapshot group".into()))
}

/// `sup(R+1)₊ ≈ C·e^{−λt}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub lambda: f64,
    /// RMS deviation of the log-linear fit.
    pub residual: f64,
    pub samples: usize,
}

/// Fits the decay of `sup(R+1)₊` over the second half of the run.
pub fn decay_fit(traj: &FlowTrajectory) -> Result<DecayFit> {
    let t: Vec<f64> = traj.records.iter().map(|r| r.t).collect();
    let y: Vec<f64> = traj.records.iter().map(|r| r.diag.sup_r_plus_1).collect();
    decay_fit_series(&t, &y)
}

/// Least-squares line through `(t, log y)` for `t ≥ t_last/2`.
pub fn decay_fit_series(t: &[f64], y: &[f64]) -> Result<DecayFit> {
    if t.len() != y.len() {
        return Err(Error::InvalidArgument("time and value series differ in length".into()));
    }
    let t_last = t.last().copied().unwrap_or(0.0);
    let (mut xs, mut ls) = (Vec::new(), Vec::new());
    let mut any_window = false;
    for (&ti, &yi) in t.iter().zip(y) {
        if ti < 0.5 * t_last {
            continue;
        }
        any_window = true;
        if yi > 0.0 {
            xs.push(ti);
            ls.push(yi.ln());
        }
    }
    if any_window && xs.is_empty() {
        return Err(Error::FitUndefined("already below target: sup(R+1)₊ vanishes on the fit window".into()));
    }
    if xs.len() < 10 {
        return Err(Error::FitUndefined(format!("{} positive samples in the fit window, need 10", xs.len())));
    }
    let fit = fit_line(&xs, &ls).ok_or_else(|| Error::FitUndefined("degenerate fit window".into()))?;
    if !fit.slope.is_finite() {
        return Err(Error::FitUndefined("non-finite decay rate".into()));
    }
    Ok(DecayFit {
        c: fit.intercept.exp(),
        lambda: -fit.slope,
        residual: fit.rms,
        samples: xs.len(),
    })
}

/// Diagnostics stream: `t, dt, sup_R_plus_1, inf_R_plus_1, l1_mass, volume`.
pub fn write_diagnostics(path: &Path, traj: &FlowTrajectory) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(path)?));
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["t", "dt", "sup_R_plus_1", "inf_R_plus_1", "l1_mass", "volume"])
        .map_err(fmt)?;
    for r in &traj.records {
        let d = &r.diag;
        w.write_record(
            [r.t, r.dt, d.sup_r_plus_1, d.inf_r_plus_1, d.l1_mass, d.volume].map(format_float),
        )
        .map_err(fmt)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_decay() {
        let t: Vec<f64> = (0..=100).map(|k| k as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-t).exp()).collect();
        let fit = decay_fit_series(&t, &y).unwrap();
        assert!((fit.lambda - 1.0).abs() < 1e-6);
        assert!((fit.c - 3.0).abs() < 1e-6);
    }

    #[test]
    fn noisy_double_rate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let t: Vec<f64> = (0..=200).map(|k| k as f64 * 0.02).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|t| 0.5 * (-2.0 * t).exp() + rng.gen_range(-1e-9..1e-9))
            .collect();
        let fit = decay_fit_series(&t, &y).unwrap();
        assert!((fit.lambda - 2.0).abs() < 1e-3, "{}", fit.lambda);
    }

    #[test]
    fn nonpositive_series_is_below_target() {
        let t: Vec<f64> = (0..20).map(f64::from).collect();
        let y = vec![0.0; 20];
        assert!(matches!(decay_fit_series(&t, &y), Err(Error::FitUndefined(m)) if m.contains("below target")));
    }
}
