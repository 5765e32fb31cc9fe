//! Fused RK4 kernel for `∂Φ/∂t = (−1 − R)/2`.
//!
//! With `w = e^{−2Φ}` the right-hand side is `−½ − ½κw + w·(Φ_ss + Φ_θθ)`.
//! The stepper keeps `w` alongside `Φ` and updates it multiplicatively with
//! `e^{−2δ}` for each stage increment `δ`, which avoids one library
//! exponential per cell and stage. `w` is recomputed from `Φ` every
//! [`RESYNC_EVERY`] steps so rounding drift stays at the `1e−14` level.
//!
//! On charts with pinned s-edges the four RK stages run as a wavefront over
//! rows: stage `q` works on row `m − q` while the stage inputs live in
//! three-row ring buffers. The state is then streamed through memory once per
//! step instead of once per stage. The arithmetic per cell is identical to
//! the stage-by-stage sweep used for s-periodic charts.

use std::sync::Arc;

use crate::geometry::{ConformalChart, Edge, MetricState, ScalarField};
use crate::numeric::{exp_small, pairwise_sum};
use crate::{Error, Result};

pub(crate) const RESYNC_EVERY: usize = 64;

/// Read-only view of the evolving state handed to step observers.
pub struct StateView<'a> {
    pub chart: &'a ConformalChart,
    /// Total log-conformal factor `Φ`.
    pub phi: &'a [f64],
    /// `e^{−2Φ}` as maintained by the stepper.
    pub weight: &'a [f64],
}

/// Per-state curvature diagnostics (over non-pinned cells).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    /// `max(0, sup(R + 1))`.
    pub sup_r_plus_1: f64,
    pub inf_r_plus_1: f64,
    /// `∫|R + 1| dV`.
    pub l1_mass: f64,
    /// `∫(R + 1)₊ dV`.
    pub positive_mass: f64,
    pub volume: f64,
    /// `sup |R|`, used for blow-up detection.
    pub sup_abs_r: f64,
}

const SMALL_ARG: f64 = 0.015625;

#[inline(always)]
fn taylor_exp(x: f64) -> f64 {
    1.0 + x
        * (1.0
            + x * (0.5
                + x * (1.0 / 6.0
                    + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x * (1.0 / 720.0 + x * (1.0 / 5040.0)))))))
}

/// `dst = src·e^{scale·k}` (or in place when `src` is `None`), using the
/// Taylor form of [`exp_small`] in a branch-free loop. Rows holding a large
/// argument are redone with the exact fallback.
#[inline]
fn scale_row(dst: &mut [f64], src: Option<&[f64]>, k: &[f64], scale: f64) {
    let n = dst.len();
    let k = &k[..n];
    let mut big = false;
    match src {
        Some(src) => {
            let src = &src[..n];
            for j in 0..n {
                let x = scale * k[j];
                big |= x.abs() > SMALL_ARG;
                dst[j] = src[j] * taylor_exp(x);
            }
            if big {
                for j in 0..n {
                    dst[j] = src[j] * exp_small(scale * k[j]);
                }
            }
        }
        None => {
            // In place, so the large-argument test must come first.
            for v in k {
                big |= (scale * v).abs() > SMALL_ARG;
            }
            if big {
                for (d, v) in dst.iter_mut().zip(k) {
                    *d *= exp_small(scale * v);
                }
            } else {
                for (d, v) in dst.iter_mut().zip(k) {
                    *d *= taylor_exp(scale * v);
                }
            }
        }
    }
}

/// `(min, max, all finite)` of a slice, with four independent lanes so the
/// reduction vectorizes.
#[inline]
fn extrema(v: &[f64]) -> (f64, f64, bool) {
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    let mut finite = true;
    let chunks = v.chunks_exact(4);
    let tail = chunks.remainder();
    for c in chunks {
        for l in 0..4 {
            lo[l] = if c[l] < lo[l] { c[l] } else { lo[l] };
            hi[l] = if c[l] > hi[l] { c[l] } else { hi[l] };
            finite &= c[l].is_finite();
        }
    }
    for &x in tail {
        lo[0] = lo[0].min(x);
        hi[0] = hi[0].max(x);
        finite &= x.is_finite();
    }
    let lo = lo.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let hi = hi.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    (lo, hi, finite)
}

/// Row-wise evaluation of the flow right-hand side.
struct Kernel {
    n_s: usize,
    nt: usize,
    is: f64,
    it: f64,
    kappa_half: f64,
    s_per: bool,
    t_per: bool,
}

impl Kernel {
    fn new(c: &ConformalChart) -> Self {
        Self {
            n_s: c.n_s,
            nt: c.n_theta,
            is: 1.0 / (c.h_s * c.h_s),
            it: 1.0 / (c.h_theta * c.h_theta),
            kappa_half: 0.5 * c.reference_curvature,
            s_per: c.topology.s_edge() == Edge::Periodic,
            t_per: c.topology.theta_edge() == Edge::Periodic,
        }
    }

    fn pinned_row(&self, i: usize) -> bool {
        !self.s_per && (i == 0 || i + 1 == self.n_s)
    }

    /// Right-hand side on a non-pinned row from its three stencil rows.
    #[inline]
    fn eval(&self, rup: &[f64], row: &[f64], rdn: &[f64], wr: &[f64], out: &mut [f64]) {
        let nt = self.nt;
        let (rup, row, rdn, wr, out) = (&rup[..nt], &row[..nt], &rdn[..nt], &wr[..nt], &mut out[..nt]);
        let (is, it, kh) = (self.is, self.it, self.kappa_half);
        let point = |c0: f64, u: f64, d: f64, l: f64, r: f64, wv: f64| {
            let lap = (u + d - 2.0 * c0) * is + (l + r - 2.0 * c0) * it;
            -0.5 - kh * wv + wv * lap
        };
        let m = nt - 2;
        let (o, c, u, d, l, r, wv) = (
            &mut out[1..nt - 1],
            &row[1..nt - 1],
            &rup[1..nt - 1],
            &rdn[1..nt - 1],
            &row[..m],
            &row[2..],
            &wr[1..nt - 1],
        );
        for j in 0..m {
            o[j] = point(c[j], u[j], d[j], l[j], r[j], wv[j]);
        }
        if self.t_per {
            out[0] = point(row[0], rup[0], rdn[0], row[nt - 1], row[1], wr[0]);
            out[nt - 1] = point(row[nt - 1], rup[nt - 1], rdn[nt - 1], row[nt - 2], row[0], wr[nt - 1]);
        } else {
            out[0] = 0.0;
            out[nt - 1] = 0.0;
        }
    }

    /// Row `i` of the right-hand side for full-grid arrays.
    #[inline]
    fn row(&self, phi: &[f64], w: &[f64], i: usize, out: &mut [f64]) {
        if self.pinned_row(i) {
            out[..self.nt].fill(0.0);
            return;
        }
        let nt = self.nt;
        let up = if i + 1 == self.n_s { 0 } else { i + 1 };
        let dn = if i == 0 { self.n_s - 1 } else { i - 1 };
        let r = |k: usize| k * nt..(k + 1) * nt;
        self.eval(&phi[r(up)], &phi[r(i)], &phi[r(dn)], &w[r(i)], out);
    }

    /// Row `i` of the right-hand side for a stage held in a three-row ring.
    #[inline]
    fn ring_row(&self, ring: &Ring, i: usize, out: &mut [f64]) {
        if self.pinned_row(i) {
            out[..self.nt].fill(0.0);
            return;
        }
        self.eval(ring.phi(i + 1), ring.phi(i), ring.phi(i - 1), ring.w(i), out);
    }
}

/// Stage state for three consecutive rows, addressed by row modulo 3.
struct Ring {
    nt: usize,
    phi: Vec<f64>,
    w: Vec<f64>,
}

impl Ring {
    fn new(nt: usize) -> Self {
        Self {
            nt,
            phi: vec![0.0; 3 * nt],
            w: vec![0.0; 3 * nt],
        }
    }

    fn slot(&self, i: usize) -> std::ops::Range<usize> {
        let s = i % 3;
        s * self.nt..(s + 1) * self.nt
    }

    fn phi(&self, i: usize) -> &[f64] {
        &self.phi[self.slot(i)]
    }

    fn w(&self, i: usize) -> &[f64] {
        &self.w[self.slot(i)]
    }

    fn row_mut(&mut self, i: usize) -> (&mut [f64], &mut [f64]) {
        let r = self.slot(i);
        (&mut self.phi[r.clone()], &mut self.w[r])
    }
}

/// Intermediate stage state `(Φ + a·k, w·e^{−2a·k})` for one row.
#[inline]
fn stage_row(k: &[f64], phi: &[f64], w: &[f64], a: f64, p_out: &mut [f64], w_out: &mut [f64]) {
    let n = p_out.len();
    let (k, phi) = (&k[..n], &phi[..n]);
    for j in 0..n {
        p_out[j] = phi[j] + a * k[j];
    }
    scale_row(w_out, Some(w), k, -2.0 * a);
}

#[inline]
fn accumulate(acc: &mut [f64], k: &[f64], weight: f64) {
    for (a, v) in acc.iter_mut().zip(k) {
        *a += weight * v;
    }
}

/// Final RK4 combination on one row; `k4` is overwritten by the increment.
#[inline]
fn finish_row(acc: &[f64], k4: &mut [f64], phi: &mut [f64], w: &mut [f64], sixth: f64, resync: bool) -> bool {
    let n = phi.len();
    let (acc, k4) = (&acc[..n], &mut k4[..n]);
    for j in 0..n {
        let inc = sixth * (acc[j] + k4[j]);
        phi[j] += inc;
        k4[j] = inc;
    }
    if resync {
        for (wv, p) in w.iter_mut().zip(phi.iter()) {
            *wv = (-2.0 * p).exp();
        }
    } else {
        scale_row(w, None, k4, -2.0);
    }
    phi.iter().all(|v| v.is_finite())
}

pub(crate) struct Stepper {
    pub chart: Arc<ConformalChart>,
    pub phi: Vec<f64>,
    pub w: Vec<f64>,
    kernel: Kernel,
    k1: Vec<f64>,
    k1_fresh: bool,
    since_sync: usize,
    row_weight: Vec<f64>,
    col_weight: Vec<f64>,
    /// Initial dynamic factor, returned verbatim on pinned cells.
    dyn0: Vec<f64>,
    work: Work,
}

enum Work {
    Wavefront {
        rings: [Ring; 3],
        acc: Vec<f64>,
        row: Vec<f64>,
    },
    Sweep {
        a: (Vec<f64>, Vec<f64>),
        b: (Vec<f64>, Vec<f64>),
        acc: Vec<f64>,
        row: Vec<f64>,
    },
}

impl Work {
    fn sweep(n: usize, nt: usize) -> Self {
        Work::Sweep {
            a: (vec![0.0; n], vec![0.0; n]),
            b: (vec![0.0; n], vec![0.0; n]),
            acc: vec![0.0; n],
            row: vec![0.0; nt],
        }
    }
}

impl Stepper {
    pub fn new(m: &MetricState) -> Self {
        let chart = m.chart.clone();
        let phi = m.total_phi();
        let w = phi.iter().map(|p| (-2.0 * p).exp()).collect();
        let (n, nt) = (phi.len(), chart.n_theta);
        let row_weight = (0..chart.n_s).map(|i| chart.cell_weight(i, 1) / chart.h_theta).collect();
        let col_weight = (0..nt).map(|j| chart.cell_weight(1, j) / chart.h_s).collect();
        let kernel = Kernel::new(&chart);
        let work = if kernel.s_per {
            Work::sweep(n, nt)
        } else {
            Work::Wavefront {
                rings: [Ring::new(nt), Ring::new(nt), Ring::new(nt)],
                acc: vec![0.0; 4 * nt],
                row: vec![0.0; nt],
            }
        };
        Self {
            kernel,
            chart,
            phi,
            w,
            k1: vec![0.0; n],
            k1_fresh: false,
            since_sync: 0,
            row_weight,
            col_weight,
            dyn0: m.phi.values.clone(),
            work,
        }
    }

    pub fn view(&self) -> StateView<'_> {
        StateView {
            chart: &self.chart,
            phi: &self.phi,
            weight: &self.w,
        }
    }

    pub fn state(&self) -> MetricState {
        let c = &*self.chart;
        let values = (0..self.phi.len())
            .map(|k| {
                let (i, j) = c.unflatten(k);
                if c.is_boundary(i, j) {
                    self.dyn0[k]
                } else {
                    self.phi[k] - c.phi0[k]
                }
            })
            .collect();
        let phi = ScalarField {
            n_s: c.n_s,
            n_theta: c.n_theta,
            values,
            mask: None,
        };
        MetricState {
            chart: self.chart.clone(),
            phi,
        }
    }

    /// Minimum of `e^{2Φ}` over the grid, from the maintained weights.
    pub fn min_conformal(&self) -> f64 {
        1.0 / extrema(&self.w).1
    }

    pub fn cfl_limit(&self, factor: f64) -> f64 {
        let h = self.chart.h_s.min(self.chart.h_theta);
        factor * h * h * self.min_conformal() / 4.0
    }

    /// Computes the first RK stage at the current state together with the
    /// curvature diagnostics (`R + 1 = −2k₁`). Integrals are pairwise sums
    /// of pairwise row sums.
    pub fn diagnose(&mut self) -> Diagnostics {
        let (ns, nt) = (self.chart.n_s, self.chart.n_theta);
        let kernel = &self.kernel;
        let (j0, j1) = if kernel.t_per { (0, nt) } else { (1, nt - 1) };
        let mut cells = [vec![0.0; nt], vec![0.0; nt], vec![0.0; nt]];
        let mut rows = [vec![0.0; ns], vec![0.0; ns], vec![0.0; ns]];
        let mut k_lo = f64::INFINITY;
        let mut k_hi = f64::NEG_INFINITY;
        let mut finite = true;
        for i in 0..ns {
            let r = i * nt..(i + 1) * nt;
            let k1 = &mut self.k1[r.clone()];
            kernel.row(&self.phi, &self.w, i, k1);
            let w = &self.w[r];
            let [l1, pos, vol] = &mut cells;
            let rw = self.row_weight[i];
            for j in 0..nt {
                vol[j] = rw * self.col_weight[j] / w[j];
            }
            rows[2][i] = pairwise_sum(vol);
            if kernel.pinned_row(i) {
                continue;
            }
            let (lo, hi, ok) = extrema(&k1[j0..j1]);
            k_lo = k_lo.min(lo);
            k_hi = k_hi.max(hi);
            finite &= ok;
            for j in 0..nt {
                let rp1 = -2.0 * k1[j];
                l1[j] = rp1.abs() * vol[j];
                pos[j] = if rp1 > 0.0 { rp1 * vol[j] } else { 0.0 };
            }
            if !kernel.t_per {
                l1[0] = 0.0;
                pos[0] = 0.0;
                l1[nt - 1] = 0.0;
                pos[nt - 1] = 0.0;
            }
            rows[0][i] = pairwise_sum(l1);
            rows[1][i] = pairwise_sum(pos);
        }
        self.k1_fresh = true;
        // R + 1 = −2k, so the extremes of R + 1 come from those of k.
        let (sup, inf) = (-2.0 * k_lo, -2.0 * k_hi);
        let sup_abs = if finite && sup.is_finite() {
            (sup - 1.0).abs().max((inf - 1.0).abs())
        } else {
            f64::INFINITY
        };
        Diagnostics {
            sup_r_plus_1: sup.max(0.0),
            inf_r_plus_1: inf,
            l1_mass: pairwise_sum(&rows[0]),
            positive_mass: pairwise_sum(&rows[1]),
            volume: pairwise_sum(&rows[2]),
            sup_abs_r: sup_abs,
        }
    }

    /// One classical RK4 step of size `dt`.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        let (ns, nt) = (self.chart.n_s, self.chart.n_theta);
        if !self.k1_fresh {
            for i in 0..ns {
                self.kernel.row(&self.phi, &self.w, i, &mut self.k1[i * nt..(i + 1) * nt]);
            }
        }
        self.k1_fresh = false;
        let resync = self.since_sync + 1 >= RESYNC_EVERY;
        let finite = match &mut self.work {
            Work::Wavefront { rings, acc, row } => {
                let bufs = (rings, &mut acc[..], &mut row[..]);
                wavefront_dispatch(&self.kernel, bufs, &self.k1, &mut self.phi, &mut self.w, dt, resync)
            }
            Work::Sweep { a, b, acc, row } => {
                let bufs = (a, b, &mut acc[..], &mut row[..]);
                sweep(&self.kernel, bufs, &self.k1, &mut self.phi, &mut self.w, dt, resync)
            }
        };
        if !finite {
            return Err(Error::NonFinite { dt });
        }
        self.since_sync = if resync { 0 } else { self.since_sync + 1 };
        Ok(())
    }
}

/// Runs [`wavefront`] compiled for AVX2 when the CPU has it. Only vector
/// width changes (no fused multiply-add), so results are bitwise identical
/// to the baseline build.
fn wavefront_dispatch(
    kernel: &Kernel,
    bufs: WaveBuffers<'_>,
    k1: &[f64],
    phi: &mut [f64],
    w: &mut [f64],
    dt: f64,
    resync: bool,
) -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") {
            #[target_feature(enable = "avx2")]
            unsafe fn wide(
                kernel: &Kernel,
                bufs: WaveBuffers<'_>,
                k1: &[f64],
                phi: &mut [f64],
                w: &mut [f64],
                dt: f64,
                resync: bool,
            ) -> bool {
                wavefront(kernel, bufs, k1, phi, w, dt, resync)
            }
            // SAFETY: the feature was detected at runtime just above.
            return unsafe { wide(kernel, bufs, k1, phi, w, dt, resync) };
        }
    }
    wavefront(kernel, bufs, k1, phi, w, dt, resync)
}

type WaveBuffers<'a> = (&'a mut [Ring; 3], &'a mut [f64], &'a mut [f64]);

#[inline(always)]
fn wavefront(
    kernel: &Kernel,
    (rings, acc, row): WaveBuffers<'_>,
    k1: &[f64],
    phi: &mut [f64],
    w: &mut [f64],
    dt: f64,
    resync: bool,
) -> bool {
    let (ns, nt) = (kernel.n_s, kernel.nt);
    let (half, sixth) = (0.5 * dt, dt / 6.0);
    let r = |i: usize| i * nt..(i + 1) * nt;
    let slot = |i: usize| (i % 4) * nt..(i % 4 + 1) * nt;
    let [ra, rb, rc] = rings;
    let mut finite = true;
    for m in 0..ns + 3 {
        if m < ns {
            let i = m;
            let (p, wo) = ra.row_mut(i);
            stage_row(&k1[r(i)], &phi[r(i)], &w[r(i)], half, p, wo);
            acc[slot(i)].copy_from_slice(&k1[r(i)]);
        }
        if (1..=ns).contains(&m) {
            let i = m - 1;
            kernel.ring_row(ra, i, row);
            let (p, wo) = rb.row_mut(i);
            stage_row(row, &phi[r(i)], &w[r(i)], half, p, wo);
            accumulate(&mut acc[slot(i)], row, 2.0);
        }
        if (2..ns + 2).contains(&m) {
            let i = m - 2;
            kernel.ring_row(rb, i, row);
            let (p, wo) = rc.row_mut(i);
            stage_row(row, &phi[r(i)], &w[r(i)], dt, p, wo);
            accumulate(&mut acc[slot(i)], row, 2.0);
        }
        if m >= 3 {
            let i = m - 3;
            kernel.ring_row(rc, i, row);
            finite &= finish_row(&acc[slot(i)], row, &mut phi[r(i)], &mut w[r(i)], sixth, resync);
        }
    }
    finite
}

type SweepBuffers<'a> = (
    &'a mut (Vec<f64>, Vec<f64>),
    &'a mut (Vec<f64>, Vec<f64>),
    &'a mut [f64],
    &'a mut [f64],
);

fn sweep(
    kernel: &Kernel,
    (a, b, acc, row): SweepBuffers<'_>,
    k1: &[f64],
    phi: &mut [f64],
    w: &mut [f64],
    dt: f64,
    resync: bool,
) -> bool {
    let (ns, nt) = (kernel.n_s, kernel.nt);
    let (half, sixth) = (0.5 * dt, dt / 6.0);
    let r = |i: usize| i * nt..(i + 1) * nt;
    for i in 0..ns {
        stage_row(&k1[r(i)], &phi[r(i)], &w[r(i)], half, &mut a.0[r(i)], &mut a.1[r(i)]);
    }
    acc.copy_from_slice(k1);
    for i in 0..ns {
        kernel.row(&a.0, &a.1, i, row);
        stage_row(row, &phi[r(i)], &w[r(i)], half, &mut b.0[r(i)], &mut b.1[r(i)]);
        accumulate(&mut acc[r(i)], row, 2.0);
    }
    for i in 0..ns {
        kernel.row(&b.0, &b.1, i, row);
        stage_row(row, &phi[r(i)], &w[r(i)], dt, &mut a.0[r(i)], &mut a.1[r(i)]);
        accumulate(&mut acc[r(i)], row, 2.0);
    }
    let mut finite = true;
    for i in 0..ns {
        kernel.row(&a.0, &a.1, i, row);
        finite &= finish_row(&acc[r(i)], row, &mut phi[r(i)], &mut w[r(i)], sixth, resync);
    }
    finite
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::surfaces::funnel;

    fn perturbed_funnel() -> MetricState {
        let w = funnel(4.0, 32, 16).unwrap();
        let mut phi = w.state.phi.clone();
        for (k, v) in phi.values.iter_mut().enumerate() {
            let (i, _) = w.state.chart.unflatten(k);
            if i > 0 && i < 31 {
                *v = 0.05 * (k as f64 * 0.7).sin();
            }
        }
        w.state.with_phi(phi).unwrap()
    }

    #[test]
    fn wavefront_matches_sweep_bitwise() {
        let m = perturbed_funnel();
        let mut a = Stepper::new(&m);
        let mut b = Stepper::new(&m);
        b.work = Work::sweep(m.chart.len(), m.chart.n_theta);
        let dt = a.cfl_limit(0.5);
        for _ in 0..100 {
            a.advance(dt).unwrap();
            b.advance(dt).unwrap();
        }
        assert_eq!(a.phi, b.phi);
        assert_eq!(a.w, b.w);
    }

    #[test]
    fn maintained_weight_tracks_exact_exponential() {
        let mut s = Stepper::new(&perturbed_funnel());
        let dt = s.cfl_limit(0.5);
        for _ in 0..RESYNC_EVERY - 1 {
            s.advance(dt).unwrap();
        }
        let worst = s
            .phi
            .iter()
            .zip(&s.w)
            .map(|(p, w)| (w / (-2.0 * p).exp() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-13, "{worst}");
    }
}

