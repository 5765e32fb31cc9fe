//! Small numerical kernels shared by the modules: deterministic summation,
//! straight-line fits, tridiagonal solves and cubic Hermite interpolation.

/// Sums `values` by recursive halving.
///
/// The split points depend only on the length, so the result is identical on
/// every run and the rounding error grows like `O(log n)`. Leaf blocks are
/// summed in four interleaved lanes.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        let mut lanes = [0.0; 4];
        let chunks = values.chunks_exact(4);
        let tail = chunks.remainder();
        for c in chunks {
            for l in 0..4 {
                lanes[l] += c[l];
            }
        }
        let mut acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
        for v in tail {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Neumaier compensated accumulator, used for quantities that are built from
/// many tiny increments (the flow clock).
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new(start: f64) -> Self {
        Self {
            sum: start,
            carry: 0.0,
        }
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Result of an ordinary least-squares line `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square of the residuals.
    pub rms: f64,
}

/// Least-squares line through the points; `None` with fewer than two distinct
/// abscissae.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = pairwise_sum(x) / nf;
    let my = pairwise_sum(y) / nf;
    let sxx: Vec<f64> = x.iter().map(|xi| (xi - mx) * (xi - mx)).collect();
    let sxy: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (xi - mx) * (yi - my))
        .collect();
    let sxx = pairwise_sum(&sxx);
    if sxx <= 0.0 {
        return None;
    }
    let slope = pairwise_sum(&sxy) / sxx;
    let intercept = my - slope * mx;
    let sq: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - intercept - slope * xi;
            r * r
        })
        .collect();
    Some(LineFit {
        slope,
        intercept,
        rms: (pairwise_sum(&sq) / nf).sqrt(),
    })
}

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i-1]` and `upper[i]` multiplies `x[i+1]` in row `i`;
/// `lower[0]` and `upper[n-1]` are ignored. Returns `None` on a zero pivot.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return None;
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Cubic Hermite interpolation on a strictly increasing abscissa with given
/// node slopes. Queries outside the node range are clamped to the end nodes.
pub fn hermite_eval(x: &[f64], y: &[f64], dy: &[f64], q: f64) -> f64 {
    let n = x.len();
    if q <= x[0] {
        return y[0];
    }
    if q >= x[n - 1] {
        return y[n - 1];
    }
    let k = match x.binary_search_by(|v| v.total_cmp(&q)) {
        Ok(k) => return y[k],
        Err(k) => k - 1,
    };
    let h = x[k + 1] - x[k];
    let t = (q - x[k]) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y[k] + h10 * h * dy[k] + h01 * y[k + 1] + h11 * h * dy[k + 1]
}

/// Second-order node derivatives of samples on a nonuniform increasing grid.
pub fn nonuniform_derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let s = (y[1] - y[0]) / (x[1] - x[0]);
            d[0] = s;
            d[1] = s;
        }
        return d;
    }
    for i in 0..n {
        // Three-point Lagrange derivative on (a, b, c), evaluated at x[i].
        let (a, b, c) = if i == 0 {
            (0, 1, 2)
        } else if i == n - 1 {
            (n - 3, n - 2, n - 1)
        } else {
            (i - 1, i, i + 1)
        };
        let (xa, xb, xc) = (x[a], x[b], x[c]);
        let xi = x[i];
        let la = ((xi - xb) + (xi - xc)) / ((xa - xb) * (xa - xc));
        let lb = ((xi - xa) + (xi - xc)) / ((xb - xa) * (xb - xc));
        let lc = ((xi - xa) + (xi - xb)) / ((xc - xa) * (xc - xb));
        d[i] = la * y[a] + lb * y[b] + lc * y[c];
    }
    d
}

/// Derivative at the middle of three samples taken at `t0 < t1 < t2`, exact for
/// quadratics.
pub fn three_point_derivative(t: [f64; 3], y: [f64; 3]) -> f64 {
    let (h0, h1) = (t[1] - t[0], t[2] - t[1]);
    -h1 / (h0 * (h0 + h1)) * y[0] + (h1 - h0) / (h0 * h1) * y[1] + h0 / (h1 * (h0 + h1)) * y[2]
}

/// `e^x` for the small arguments produced by a single time-step increment.
///
/// Uses a degree-7 Taylor polynomial when `|x| ≤ 2⁻⁶` (truncation below the
/// rounding level) and falls back to the library exponential otherwise.
#[inline(always)]
pub fn exp_small(x: f64) -> f64 {
    if x.abs() <= 0.015625 {
        1.0 + x
            * (1.0
                + x * (0.5
                    + x * (1.0 / 6.0
                        + x * (1.0 / 24.0
                            + x * (1.0 / 120.0 + x * (1.0 / 720.0 + x * (1.0 / 5040.0)))))))
    } else {
        x.exp()
    }
}
