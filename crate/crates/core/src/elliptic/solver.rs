//! Flat five-point Poisson systems on rectangular sub-grids, solved by
//! Jacobi-preconditioned conjugate gradients.
//!
//! Because `Δ_g = e^{−2Φ}(∂_s² + ∂_θ²)`, every metric Poisson problem becomes
//! the flat system `−L u = −e^{2Φ} f` with the metric only in the source.

use crate::geometry::{field_like, integrate, ConformalChart, Edge, MetricState, ScalarField};
use crate::{Error, Result};

/// Linear-solver controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Relative residual `‖b − Ax‖₂/‖b‖₂` to reach.
    pub tol: f64,
    /// Iteration cap; `None` means 50 × the number of unknowns.
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, max_iter: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
}

/// A contiguous, possibly wrapping, run of grid indices along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub len: usize,
    /// Grid size along the axis.
    pub n: usize,
    /// The run is the whole periodic axis (neighbours wrap).
    pub periodic: bool,
}

impl Span {
    pub fn full_periodic(n: usize) -> Self {
        Self {
            start: 0,
            len: n,
            n,
            periodic: true,
        }
    }

    pub fn range(start: usize, len: usize, n: usize) -> Self {
        Self {
            start,
            len,
            n,
            periodic: false,
        }
    }

    /// Every non-pinned index of an axis with the given edge type.
    pub fn interior(n: usize, edge: Edge) -> Self {
        match edge {
            Edge::Periodic => Self::full_periodic(n),
            Edge::Dirichlet => Self::range(1, n - 2, n),
        }
    }

    #[inline]
    pub fn global(&self, local: usize) -> usize {
        (self.start + local) % self.n
    }

    pub fn local(&self, global: usize) -> Option<usize> {
        let off = (global + self.n - self.start % self.n) % self.n;
        (off < self.len).then_some(off)
    }
}

/// Rectangular set of unknowns; everything outside carries fixed values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub rows: Span,
    pub cols: Span,
}

impl Window {
    /// All non-pinned cells of a chart.
    pub fn interior(c: &ConformalChart) -> Self {
        Self {
            rows: Span::interior(c.n_s, c.topology.s_edge()),
            cols: Span::interior(c.n_theta, c.topology.theta_edge()),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len * self.cols.len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_singular(&self) -> bool {
        self.rows.periodic && self.cols.periodic
    }

    /// Global flat index of local unknown `(a, b)`.
    #[inline]
    pub fn global(&self, c: &ConformalChart, a: usize, b: usize) -> usize {
        c.index(self.rows.global(a), self.cols.global(b))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.rows.local(i).is_some() && self.cols.local(j).is_some()
    }
}

/// `−L` restricted to a window with zero values outside.
struct Operator {
    nr: usize,
    nc: usize,
    rows_periodic: bool,
    cols_periodic: bool,
    is: f64,
    it: f64,
    diag: f64,
}

impl Operator {
    fn new(c: &ConformalChart, w: &Window) -> Self {
        let is = 1.0 / (c.h_s * c.h_s);
        let it = 1.0 / (c.h_theta * c.h_theta);
        Self {
            nr: w.rows.len,
            nc: w.cols.len,
            rows_periodic: w.rows.periodic,
            cols_periodic: w.cols.periodic,
            is,
            it,
            diag: 2.0 * is + 2.0 * it,
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (nr, nc) = (self.nr, self.nc);
        let (is, it, d) = (self.is, self.it, self.diag);
        let zero = vec![0.0; nc];
        for a in 0..nr {
            let row = &x[a * nc..(a + 1) * nc];
            let up = if a + 1 < nr {
                &x[(a + 1) * nc..(a + 2) * nc]
            } else if self.rows_periodic {
                &x[..nc]
            } else {
                &zero[..]
            };
            let dn = if a > 0 {
                &x[(a - 1) * nc..a * nc]
            } else if self.rows_periodic {
                &x[(nr - 1) * nc..]
            } else {
                &zero[..]
            };
            let out = &mut y[a * nc..(a + 1) * nc];
            if nc >= 2 {
                let m = nc - 2;
                let (o, c, u, dd, l, r) = (&mut out[1..nc - 1], &row[1..nc - 1], &up[1..nc - 1], &dn[1..nc - 1], &row[..m], &row[2..]);
                for j in 0..m {
                    o[j] = d * c[j] - (u[j] + dd[j]) * is - (l[j] + r[j]) * it;
                }
            }
            let (first_l, last_r) = if self.cols_periodic { (row[nc - 1], row[0]) } else { (0.0, 0.0) };
            let r0 = if nc > 1 { row[1] } else { last_r };
            out[0] = d * row[0] - (up[0] + dn[0]) * is - (first_l + r0) * it;
            if nc > 1 {
                out[nc - 1] = d * row[nc - 1] - (up[nc - 1] + dn[nc - 1]) * is - (row[nc - 2] + last_r) * it;
            }
        }
    }
}

/// Dot product with four interleaved lanes (fixed order, so deterministic).
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            lanes[l] += x[l] * y[l];
        }
    }
    let mut acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (x, y) in ta.iter().zip(tb) {
        acc += x * y;
    }
    acc
}

fn project_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Solves `−L x = b` on the window, starting from `x`. Singular (doubly
/// periodic) windows need a zero-sum `b`; the solution is returned with zero
/// sum as well.
pub(crate) fn pcg(c: &ConformalChart, w: &Window, b: &[f64], x: &mut [f64], opts: &SolveOptions) -> Result<SolveReport> {
    let op = Operator::new(c, w);
    let n = w.len();
    let singular = w.is_singular();
    let cap = opts.max_iter.unwrap_or(50 * n);
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag = 1.0 / op.diag;
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    // Restart from the true residual until it, not only the recursively
    // updated one, meets the tolerance. A restart that fails to halve the
    // true residual means roundoff has the last word.
    let mut last_true = f64::INFINITY;
    loop {
        op.apply(x, &mut ap);
        for k in 0..n {
            r[k] = b[k] - ap[k];
        }
        if singular {
            project_mean(&mut r);
        }
        let true_res = dot(&r, &r).sqrt() / bnorm;
        if true_res <= opts.tol {
            if singular {
                project_mean(x);
            }
            return Ok(SolveReport {
                iterations,
                residual: true_res,
            });
        }
        if iterations >= cap || !true_res.is_finite() || true_res > 0.5 * last_true {
            return Err(Error::SolverDivergence {
                iterations,
                residual: true_res,
            });
        }
        last_true = true_res;
        let mut z: Vec<f64> = r.iter().map(|v| v * inv_diag).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut progressed = false;
        while iterations < cap {
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            iterations += 1;
            progressed = true;
            if dot(&r, &r).sqrt() / bnorm <= 0.5 * opts.tol {
                break;
            }
            for k in 0..n {
                z[k] = r[k] * inv_diag;
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        if !progressed {
            return Err(Error::SolverDivergence {
                iterations,
                residual: true_res,
            });
        }
    }
}

/// Boundary contribution of fixed values just outside the window, added to
/// `b` (the `−L` system moves known neighbours to the right-hand side).
fn add_boundary_terms(c: &ConformalChart, w: &Window, values: &[f64], b: &mut [f64]) {
    let is = 1.0 / (c.h_s * c.h_s);
    let it = 1.0 / (c.h_theta * c.h_theta);
    let (nr, nc) = (w.rows.len, w.cols.len);
    for a in 0..nr {
        for bcol in 0..nc {
            let i = w.rows.global(a);
            let j = w.cols.global(bcol);
            let mut acc = 0.0;
            if !w.rows.periodic {
                if a == 0 && i > 0 {
                    acc += values[c.index(i - 1, j)] * is;
                }
                if a + 1 == nr && i + 1 < c.n_s {
                    acc += values[c.index(i + 1, j)] * is;
                }
                if a == 0 && i == 0 && c.topology.s_edge() == Edge::Periodic {
                    acc += values[c.index(c.n_s - 1, j)] * is;
                }
                if a + 1 == nr && i + 1 == c.n_s && c.topology.s_edge() == Edge::Periodic {
                    acc += values[c.index(0, j)] * is;
                }
            }
            if !w.cols.periodic {
                let jm = if j > 0 {
                    Some(j - 1)
                } else if c.topology.theta_edge() == Edge::Periodic {
                    Some(c.n_theta - 1)
                } else {
                    None
                };
                let jp = if j + 1 < c.n_theta {
                    Some(j + 1)
                } else if c.topology.theta_edge() == Edge::Periodic {
                    Some(0)
                } else {
                    None
                };
                if bcol == 0 {
                    if let Some(jm) = jm {
                        acc += values[c.index(i, jm)] * it;
                    }
                }
                if bcol + 1 == nc {
                    if let Some(jp) = jp {
                        acc += values[c.index(i, jp)] * it;
                    }
                }
            }
            b[a * nc + bcol] += acc;
        }
    }
}

/// Solves `Δ_g u = f` on a window with `u = outside` off the window. Returns
/// the full-grid solution.
pub(crate) fn solve_on_window(
    m: &MetricState,
    w: &Window,
    f: &[f64],
    outside: &[f64],
    warm: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let c = &*m.chart;
    let phi = m.total_phi();
    let n = w.len();
    let mut b = vec![0.0; n];
    let mut x = vec![0.0; n];
    for a in 0..w.rows.len {
        for bc in 0..w.cols.len {
            let g = w.global(c, a, bc);
            b[a * w.cols.len + bc] = -(2.0 * phi[g]).exp() * f[g];
            if let Some(warm) = warm {
                x[a * w.cols.len + bc] = warm[g];
            }
        }
    }
    add_boundary_terms(c, w, outside, &mut b);
    if w.is_singular() {
        project_mean(&mut b);
    }
    let report = pcg(c, w, &b, &mut x, opts)?;
    let mut u = outside.to_vec();
    for a in 0..w.rows.len {
        for bc in 0..w.cols.len {
            u[w.global(c, a, bc)] = x[a * w.cols.len + bc];
        }
    }
    Ok((u, report))
}

/// Solves `Δ_g u = f` with Dirichlet values `bc` on pinned cells (zero when
/// `None`). On closed charts `f` must integrate to zero and `u` is
/// normalized to `∫u dV = 0`.
pub fn solve_poisson(m: &MetricState, f: &ScalarField, bc: Option<&ScalarField>) -> Result<ScalarField> {
    Ok(solve_poisson_with(m, f, bc, &SolveOptions::default())?.0)
}

pub fn solve_poisson_with(
    m: &MetricState,
    f: &ScalarField,
    bc: Option<&ScalarField>,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveReport)> {
    let c = &*m.chart;
    f.check_aligned(c)?;
    if let Some(k) = f.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("source is not finite at cell {:?}", c.unflatten(k))));
    }
    let outside = match bc {
        Some(bc) => {
            bc.check_aligned(c)?;
            bc.values.clone()
        }
        None => vec![0.0; c.len()],
    };
    let w = Window::interior(c);
    if w.is_singular() {
        let integral = integrate(f, m)?;
        let l1 = integrate(&f.map(f64::abs), m)?;
        if integral.abs() > 1e-8 * l1 {
            return Err(Error::NonZeroMean { integral, l1 });
        }
    }
    let (mut u, report) = solve_on_window(m, &w, &f.values, &outside, None, opts)?;
    if w.is_singular() {
        let field = field_like(c, u.clone());
        let mean = integrate(&field, m)? / crate::geometry::volume(m);
        for v in u.iter_mut() {
            *v -= mean;
        }
    }
    Ok((field_like(c, u), report))
}

/// `solve_poisson(f₊) − solve_poisson(f₋)` with the boundary values carried by
/// the positive part.
pub fn split_solve_signed(m: &MetricState, f: &ScalarField) -> Result<ScalarField> {
    split_solve_signed_with(m, f, &SolveOptions::default())
}

pub fn split_solve_signed_with(m: &MetricState, f: &ScalarField, opts: &SolveOptions) -> Result<ScalarField> {
    let pos = f.map(|v| v.max(0.0));
    let neg = f.map(|v| (-v).max(0.0));
    let (up, _) = solve_poisson_with(m, &pos, None, opts)?;
    let (un, _) = solve_poisson_with(m, &neg, None, opts)?;
    up.zip_with(&un, |a, b| a - b)
}
