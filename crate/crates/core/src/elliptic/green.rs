//! Positive Green's functions by Dirichlet exhaustion and the estimates
//! checked against them.

use std::f64::consts::PI;

use super::solver::{solve_on_window, SolveOptions, SolveReport, Span, Window};
use crate::geometry::{
    field_like, geodesic_distance, grad_norm_sq, laplace_beltrami, ConformalChart, Edge, GridIndex, MetricState,
    ScalarField,
};
use crate::{Error, Result};

/// Solver tolerance for Green solves; tight enough that exhaustion
/// monotonicity can be asserted to 1e−12.
pub const GREEN_SOLVER_TOL: f64 = 1e-12;
/// Radius of the first exhaustion domain.
pub const EXHAUSTION_START: f64 = 1.5;
/// Radius increment between exhaustion domains.
pub const EXHAUSTION_STEP: f64 = 0.5;
/// Contraction factor of the running minimum gap rate over three
/// enlargements at or above which the exhaustion counts as non-contracting.
pub const PARABOLIC_RATIO: f64 = 0.9;
/// Grid of growth rates tried by [`fit_relative_constants`].
pub const RELATIVE_RATES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
/// Gradient-estimate constants `C₁`, `C₂`.
pub const GRADIENT_C1: f64 = 10.0;
pub const GRADIENT_C2: f64 = 40.0;

/// Green's function with pole at `pole` (pole cell masked).
#[derive(Clone, Debug)]
pub struct GreenSample {
    pub pole: GridIndex,
    pub field: ScalarField,
    /// Geodesic radius that generated the final domain.
    pub radius: f64,
    pub window: Window,
    /// Last `sup |G_{k+1} − G_k|` on the previous domain (∞ with one domain).
    pub gap: f64,
    pub gaps: Vec<f64>,
    /// Largest `G_k − G_{k+1}` seen on shared domains (≤ 0 when monotone).
    pub monotone_defect: f64,
    /// The gap reached the tolerance before the chart ran out.
    pub converged: bool,
}

impl GreenSample {
    /// Value at a cell; `+∞` at the pole.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        if (i, j) == self.pole {
            f64::INFINITY
        } else {
            self.field.get(i, j)
        }
    }
}

/// Green's function of the hyperbolic plane, `(1/2π) log coth(d/2)`.
pub fn hyperbolic_green(d: f64) -> f64 {
    (1.0 / (0.5 * d).tanh()).ln() / (2.0 * PI)
}

fn delta_source(c: &ConformalChart, m: &MetricState, pole: GridIndex) -> Vec<f64> {
    // Δ_g G = −δ with δ = 1/(cell area); in flat terms −L G = 1/(h_s h_θ).
    let phi = m.total_phi();
    let k = c.index(pole.0, pole.1);
    let mut f = vec![0.0; c.len()];
    f[k] = -1.0 / ((2.0 * phi[k]).exp() * c.h_s * c.h_theta);
    f
}

/// Dirichlet Green's function of one window.
pub fn dirichlet_green(
    m: &MetricState,
    pole: GridIndex,
    window: &Window,
    warm: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveReport)> {
    let c = &*m.chart;
    if !window.contains(pole.0, pole.1) {
        return Err(Error::InvalidArgument(format!("pole {pole:?} outside the solve window")));
    }
    if window.is_singular() {
        return Err(Error::Precondition("a Green's function needs a Dirichlet edge".into()));
    }
    let f = delta_source(c, m, pole);
    let zero = vec![0.0; c.len()];
    let (g, report) = solve_on_window(m, window, &f, &zero, warm, opts)?;
    Ok((field_like(c, g).with_masked_cell(pole.0, pole.1), report))
}

/// Span covering every index whose flag is set, around `center`. Dirichlet
/// axes are clamped to the non-pinned range; the flag says the clamp was hit
/// on both sides. A window clamped on one side only keeps growing on the
/// other, otherwise an off-centre pole would stop with its far side cut short.
fn span_for(hit: &[bool], center: usize, edge: Edge) -> (Span, bool) {
    let n = hit.len();
    match edge {
        Edge::Dirichlet => {
            let lo = (0..=center).rev().take_while(|&k| hit[k]).last().unwrap_or(center);
            let hi = (center..n).take_while(|&k| hit[k]).last().unwrap_or(center);
            let touches = lo <= 1 && hi + 2 >= n;
            let (lo, hi) = (lo.max(1), hi.min(n - 2));
            (Span::range(lo, hi - lo + 1, n), touches)
        }
        Edge::Periodic => {
            let half = n / 2;
            let mut lo = 0usize;
            while lo < half && hit[(center + n - lo - 1) % n] {
                lo += 1;
            }
            let mut hi = 0usize;
            while hi < n - 1 - half && hit[(center + hi + 1) % n] {
                hi += 1;
            }
            if lo + hi + 1 >= n - 1 {
                (Span::full_periodic(n), false)
            } else {
                (Span::range((center + n - lo) % n, lo + hi + 1, n), false)
            }
        }
    }
}

/// Smallest window containing the sub-level set `{d < radius}` (taken as
/// contiguous around the pole), always the full ring along a periodic θ. The flag reports that the chart ran out.
fn exhaustion_window(c: &ConformalChart, d: &ScalarField, pole: GridIndex, radius: f64) -> (Window, bool) {
    let mut row_hit = vec![false; c.n_s];
    let mut col_hit = vec![false; c.n_theta];
    for i in 0..c.n_s {
        for j in 0..c.n_theta {
            if d.get(i, j) < radius {
                row_hit[i] = true;
                col_hit[j] = true;
            }
        }
    }
    let (mut rows, rt) = span_for(&row_hit, pole.0, c.topology.s_edge());
    // Periodic θ gives annular bands from the start: closing the ring later
    // would make the gap sequence jump for reasons unrelated to the end.
    let (cols, ct) = match c.topology.theta_edge() {
        Edge::Periodic => (Span::full_periodic(c.n_theta), false),
        Edge::Dirichlet => span_for(&col_hit, pole.1, Edge::Dirichlet),
    };
    let mut exhausted = rt || ct;
    if rows.periodic && cols.periodic {
        // A closed chart: keep one row pinned so the system stays definite.
        rows = Span::range((pole.0 + c.n_s / 2 + 1) % c.n_s, c.n_s - 1, c.n_s);
        exhausted = true;
    }
    (Window { rows, cols }, exhausted)
}

/// Distance from the pole to the nearest cell just outside each Dirichlet
/// side of the window; `None` when that cell is a pinned chart edge.
fn side_radii(c: &ConformalChart, d: &ScalarField, w: &Window) -> Vec<Option<f64>> {
    let mut sides = Vec::new();
    let nearest = |cells: &mut dyn Iterator<Item = (usize, usize)>| {
        cells.map(|(i, j)| d.get(i, j)).fold(f64::INFINITY, f64::min)
    };
    let pinned = |k: usize, n: usize, edge: Edge| edge == Edge::Dirichlet && (k == 0 || k + 1 == n);
    if !w.rows.periodic {
        let before = (w.rows.start + c.n_s - 1) % c.n_s;
        let after = (w.rows.global(w.rows.len - 1) + 1) % c.n_s;
        for i in [before, after] {
            let r = nearest(&mut (0..w.cols.len).map(|b| (i, w.cols.global(b))));
            sides.push((!pinned(i, c.n_s, c.topology.s_edge())).then_some(r));
        }
    }
    if !w.cols.periodic {
        let before = (w.cols.start + c.n_theta - 1) % c.n_theta;
        let after = (w.cols.global(w.cols.len - 1) + 1) % c.n_theta;
        for j in [before, after] {
            let r = nearest(&mut (0..w.rows.len).map(|a| (w.rows.global(a), j)));
            sides.push((!pinned(j, c.n_theta, c.topology.theta_edge())).then_some(r));
        }
    }
    sides
}

/// Mean outward growth over the sides that moved between two windows. Sides
/// at a pinned chart edge do not count: the last rows of a compressed end can
/// span a large distance in one step, which says nothing about contraction.
fn side_growth(c: &ConformalChart, d: &ScalarField, old: &Window, new: &Window) -> f64 {
    let (a, b) = (side_radii(c, d, old), side_radii(c, d, new));
    let moved: Vec<f64> = a
        .iter()
        .zip(&b)
        .filter_map(|(x, y)| Some((*y)? - (*x)?))
        .filter(|g| *g > 0.0)
        .collect();
    if moved.is_empty() {
        return 0.0;
    }
    moved.iter().sum::<f64>() / moved.len() as f64
}

/// Builds `G(·, pole)` as the limit of Dirichlet Green's functions on growing
/// windows `B_k`, stopping once `sup_{B_{k−1}} |G_{k+1} − G_k| ≤ tol` or the
/// chart is exhausted (`converged = false`).
pub fn green_exhaustion(m: &MetricState, pole: GridIndex, tol: f64) -> Result<GreenSample> {
    let c = &*m.chart;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("exhaustion tolerance {tol} must be positive")));
    }
    if pole.0 >= c.n_s || pole.1 >= c.n_theta || c.is_boundary(pole.0, pole.1) {
        return Err(Error::InvalidArgument(format!("pole {pole:?} must be a non-pinned cell")));
    }
    let d = geodesic_distance(m, pole)?;
    let opts = SolveOptions::with_tol(GREEN_SOLVER_TOL);
    let mut prev: Option<(Window, ScalarField)> = None;
    let mut gaps = Vec::new();
    let mut rates = Vec::new();
    let mut defect = f64::NEG_INFINITY;
    for k in 0.. {
        let radius = EXHAUSTION_START + EXHAUSTION_STEP * k as f64;
        let (window, exhausted) = exhaustion_window(c, &d, pole, radius);
        if prev.as_ref().is_some_and(|(w, _)| *w == window) {
            if exhausted {
                break;
            }
            continue;
        }
        let warm = prev.as_ref().map(|(_, g)| &g.values[..]);
        let (g, _) = dirichlet_green(m, pole, &window, warm, &opts)?;
        let mut converged = false;
        if let Some((pw, pg)) = &prev {
            let mut gap = 0.0f64;
            for i in 0..c.n_s {
                for j in 0..c.n_theta {
                    if (i, j) == pole || !pw.contains(i, j) {
                        continue;
                    }
                    let (a, b) = (pg.get(i, j), g.get(i, j));
                    gap = gap.max((b - a).abs());
                    defect = defect.max(a - b);
                }
            }
            gaps.push(gap);
            converged = gap <= tol;
            // Near a conformally short end every added row changes G by about
            // h_s/2π, exactly as on a cylinder; the ends differ only in how
            // much geodesic radius a row buys. Contraction is therefore
            // judged on the gap per unit of outward growth of the moving sides, and on its
            // running minimum because single enlargements are uneven.
            let grown = side_growth(c, &d, pw, &window);
            if grown > 0.0 {
                rates.push(gap / grown);
            }
            if !converged && rates.len() >= 4 {
                let l = rates.len();
                let min_of = |g: &[f64]| g.iter().copied().fold(f64::INFINITY, f64::min);
                if min_of(&rates[l - 3..]) >= PARABOLIC_RATIO * min_of(&rates[..l - 3]) {
                    return Err(Error::ParabolicLike { gaps });
                }
            }
        }
        if converged || exhausted {
            return Ok(GreenSample {
                pole,
                field: g,
                radius,
                window,
                gap: gaps.last().copied().unwrap_or(f64::INFINITY),
                gaps,
                monotone_defect: defect,
                converged,
            });
        }
        prev = Some((window, g));
    }
    // Only reached when the last enlargement repeated an exhausted window.
    let (window, g) = prev.expect("at least one exhaustion domain");
    Ok(GreenSample {
        pole,
        field: g,
        radius: f64::NAN,
        window,
        gap: gaps.last().copied().unwrap_or(f64::INFINITY),
        gaps,
        monotone_defect: defect,
        converged: false,
    })
}

/// Local model `G ≈ c₀ − log(ρ)/2π` fitted on the four neighbours of the pole,
/// and the radius of the disc with the pole cell's area.
fn pole_model(g: &GreenSample, m: &MetricState) -> (f64, f64) {
    let c = &*m.chart;
    let phi = m.total_phi();
    let (pi, pj) = g.pole;
    let e = phi[c.index(pi, pj)].exp();
    let area = e * e * c.h_s * c.h_theta;
    let mut c0 = 0.0;
    let mut n = 0.0;
    let nbrs = [
        (pi as isize + 1, pj as isize, c.h_s),
        (pi as isize - 1, pj as isize, c.h_s),
        (pi as isize, pj as isize + 1, c.h_theta),
        (pi as isize, pj as isize - 1, c.h_theta),
    ];
    for (i, j, h) in nbrs {
        let i = i.rem_euclid(c.n_s as isize) as usize;
        let j = j.rem_euclid(c.n_theta as isize) as usize;
        let rho = 0.5 * (e + phi[c.index(i, j)].exp()) * h;
        c0 += g.field.get(i, j) + rho.ln() / (2.0 * PI);
        n += 1.0;
    }
    (c0 / n, (area / PI).sqrt())
}

/// `∫_{ρ<ρ*} (c₀ − log ρ / 2π) dA` over a geodesic disc.
fn log_disc_integral(c0: f64, rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    let r2 = rho * rho;
    c0 * PI * r2 - (0.5 * r2 * rho.ln() - 0.25 * r2)
}

fn ensure_in_domain(g: &GreenSample, m: &MetricState, d: &ScalarField, radius: f64) -> Result<()> {
    let c = &*m.chart;
    for i in 0..c.n_s {
        for j in 0..c.n_theta {
            if d.get(i, j) < radius && (c.is_boundary(i, j) || !g.window.contains(i, j)) {
                return Err(Error::BallOutsideDomain { radius });
            }
        }
    }
    Ok(())
}

/// `∫_{B(pole, 1)} G dV`, with the pole cell replaced by the analytic
/// integral of the local logarithmic model.
pub fn green_ball_integral(g: &GreenSample, m: &MetricState) -> Result<f64> {
    g.field.check_aligned(&m.chart)?;
    let c = &*m.chart;
    let d = geodesic_distance(m, g.pole)?;
    ensure_in_domain(g, m, &d, 1.0)?;
    let phi = m.total_phi();
    let mut total = 0.0;
    for i in 0..c.n_s {
        for j in 0..c.n_theta {
            if (i, j) == g.pole || d.get(i, j) >= 1.0 {
                continue;
            }
            let k = c.index(i, j);
            total += g.field.values[k] * (2.0 * phi[k]).exp() * c.cell_weight(i, j);
        }
    }
    let (c0, rho) = pole_model(g, m);
    Ok(total + log_disc_integral(c0, rho))
}

/// `∫_{G > e^{A r}} G dV` with `r` the distance from `x0` to the pole.
pub fn relative_green_stat(g: &GreenSample, x0: GridIndex, a: f64, m: &MetricState) -> Result<f64> {
    let r = geodesic_distance(m, x0)?.get(g.pole.0, g.pole.1);
    relative_green_stat_at(g, r, a, m)
}

/// [`relative_green_stat`] with the distance `r` already known.
pub fn relative_green_stat_at(g: &GreenSample, r: f64, a: f64, m: &MetricState) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("growth rate A = {a} must be positive")));
    }
    g.field.check_aligned(&m.chart)?;
    let c = &*m.chart;
    let level = (a * r).exp();
    let phi = m.total_phi();
    let mut total = 0.0;
    for i in 0..c.n_s {
        for j in 0..c.n_theta {
            let k = c.index(i, j);
            if (i, j) == g.pole || g.field.values[k] <= level {
                continue;
            }
            total += g.field.values[k] * (2.0 * phi[k]).exp() * c.cell_weight(i, j);
        }
    }
    // Inside the pole cell the super-level set is the disc where the model
    // exceeds the level; the exponent is clamped so huge levels give 0.
    let (c0, rho_cell) = pole_model(g, m);
    let rho_level = (-(2.0 * PI) * (level - c0)).max(-700.0).exp();
    Ok(total + log_disc_integral(c0, rho_cell.min(rho_level)))
}

/// One pole of a Green sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub pole: GridIndex,
    pub r_to_x0: f64,
    pub ball_integral: f64,
    /// Statistic for every rate in [`RELATIVE_RATES`].
    pub relstat: Vec<f64>,
    pub converged: bool,
}

/// Green's function, ball integral and relative statistics for one pole.
pub fn sweep_row(m: &MetricState, x0: GridIndex, pole: GridIndex, tol: f64) -> Result<SweepRow> {
    let g = green_exhaustion(m, pole, tol)?;
    let r = geodesic_distance(m, x0)?.get(pole.0, pole.1);
    let ball_integral = green_ball_integral(&g, m)?;
    let relstat = RELATIVE_RATES
        .iter()
        .map(|&a| relative_green_stat_at(&g, r, a, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepRow {
        pole,
        r_to_x0: r,
        ball_integral,
        relstat,
        converged: g.converged,
    })
}

/// Accepted growth constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeConstants {
    pub a: f64,
    pub b: f64,
}

/// Default exhaustion tolerance used by sweeps.
pub const SWEEP_TOL: f64 = 1e-4;

/// Smallest `A` in [`RELATIVE_RATES`] whose `B(A) = max statistic·e^{−Ar}`
/// is stable: `B` over the far half of the poles is at most 1.5× `B` over the
/// near half.
pub fn fit_relative_constants(m: &MetricState, x0: GridIndex, poles: &[GridIndex]) -> Result<RelativeConstants> {
    let rows = poles
        .iter()
        .map(|&p| sweep_row(m, x0, p, SWEEP_TOL))
        .collect::<Result<Vec<_>>>()?;
    fit_from_rows(&rows)
}

pub fn fit_from_rows(rows: &[SweepRow]) -> Result<RelativeConstants> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no poles to fit".into()));
    }
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.r_to_x0.total_cmp(&b.r_to_x0));
    let half = sorted.len().div_ceil(2);
    let mut table = String::from("A, B_near, B_far");
    for (q, &a) in RELATIVE_RATES.iter().enumerate() {
        let b_of = |rs: &[&SweepRow]| {
            rs.iter()
                .map(|r| r.relstat[q] * (-a * r.r_to_x0).exp())
                .fold(0.0, f64::max)
        };
        let (near, far) = (b_of(&sorted[..half]), b_of(&sorted[half..]));
        if far <= 1.5 * near {
            return Ok(RelativeConstants { a, b: near.max(far) });
        }
        table.push_str(&format!("\n{a}, {near:e}, {far:e}"));
    }
    Err(Error::NoStableConstant { table })
}

/// Outcome of the harmonic gradient estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    /// `sup |∇ log u|²` over the inner ball.
    pub lhs: f64,
    /// `C₁K + C₂/R²`.
    pub rhs: f64,
    pub passed: bool,
}

/// Tolerance on `R²·|Δu| / sup u` for `u` to count as harmonic.
pub const HARMONIC_TOL: f64 = 1e-6;

/// Checks `sup_{B(center, R)} |∇ log u|² ≤ C₁K + C₂R⁻²` for `u` positive and
/// harmonic on `B(center, 2R)`.
pub fn gradient_log_harmonic_check(
    u: &ScalarField,
    m: &MetricState,
    k: f64,
    radius: f64,
    center: GridIndex,
) -> Result<GradientCheck> {
    u.check_aligned(&m.chart)?;
    if !(radius > 0.0) || !(k >= 0.0) {
        return Err(Error::InvalidArgument(format!("need R > 0 and K ≥ 0, got R={radius} K={k}")));
    }
    let c = &*m.chart;
    let d = geodesic_distance(m, center)?;
    let lap = laplace_beltrami(u, m)?;
    let mut scale = 0.0f64;
    let mut worst_lap = 0.0f64;
    for i in 0..c.n_s {
        for j in 0..c.n_theta {
            if d.get(i, j) >= 2.0 * radius {
                continue;
            }
            let v = u.get(i, j);
            if !(v > 0.0) {
                return Err(Error::Precondition(format!("u = {v} is not positive at cell {:?}", (i, j))));
            }
            if !c.is_interior(i, j, 1) {
                return Err(Error::BallOutsideDomain { radius: 2.0 * radius });
            }
            scale = scale.max(v);
            worst_lap = worst_lap.max(lap.get(i, j).abs());
        }
    }
    if worst_lap * radius * radius > HARMONIC_TOL * scale {
        return Err(Error::Precondition(format!(
            "u is not harmonic on the ball: |Δu| up to {worst_lap:e}"
        )));
    }
    let g = grad_norm_sq(&u.map(f64::ln), m)?;
    let mut lhs = 0.0f64;
    for i in 0..c.n_s {
        for j in 0..c.n_theta {
            if d.get(i, j) < radius {
                lhs = lhs.max(g.get(i, j));
            }
        }
    }
    let rhs = GRADIENT_C1 * k + GRADIENT_C2 / (radius * radius);
    Ok(GradientCheck {
        lhs,
        rhs,
        passed: lhs <= rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::surfaces::{flat_cylinder, hyperbolic_funnel};
    use crate::geometry::Topology;

    #[test]
    fn hyperbolic_green_matches_its_derivative() {
        let d = 1.3;
        let h = 1e-5;
        let num = (hyperbolic_green(d + h) - hyperbolic_green(d - h)) / (2.0 * h);
        assert!((num + 1.0 / (2.0 * PI * d.sinh())).abs() < 1e-8);
    }

    #[test]
    fn cylinder_is_parabolic() {
        let w = flat_cylinder(40.0, 201, 32).unwrap();
        match green_exhaustion(&w.state, (100, 0), 1e-6) {
            Err(Error::ParabolicLike { gaps }) => assert!(gaps.len() >= 4),
            Ok(g) => panic!("expected parabolic diagnostic, got gaps {:?} window {:?}", g.gaps, g.window),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn funnel_green_is_positive_and_monotone() {
        let w = hyperbolic_funnel(1.0, 6.0, 64, 64).unwrap();
        let g = green_exhaustion(&w.state, (32, 0), 0.015).unwrap();
        assert!(g.monotone_defect <= 1e-12, "{} {:?}", g.monotone_defect, g.gaps);
        for i in 0..64 {
            for j in 0..64 {
                if g.window.contains(i, j) && (i, j) != g.pole {
                    assert!(g.field.get(i, j) > 0.0);
                }
            }
        }
        assert!(g.converged && g.gap < g.gaps[0], "{:?}", g.gaps);
    }

    #[test]
    fn huge_rate_gives_zero_statistic() {
        let w = hyperbolic_funnel(1.0, 6.0, 64, 64).unwrap();
        let g = green_exhaustion(&w.state, (32, 0), 0.015).unwrap();
        assert_eq!(relative_green_stat_at(&g, 1.0, 50.0, &w.state).unwrap(), 0.0);
        let at_pole = relative_green_stat(&g, (32, 0), 1.0, &w.state).unwrap();
        assert!(at_pole > 0.0 && at_pole.is_finite());
    }

    #[test]
    fn single_pole_fit_is_trivial() {
        let row = SweepRow {
            pole: (3, 0),
            r_to_x0: 2.0,
            ball_integral: 0.1,
            relstat: vec![0.5; RELATIVE_RATES.len()],
            converged: true,
        };
        let fit = fit_from_rows(&[row]).unwrap();
        assert_eq!(fit.a, 0.25);
        assert_eq!(fit.b, 0.5 * (-0.5f64).exp());
    }

    #[test]
    fn gradient_check_examples() {
        let c = ConformalChart::flat(Topology::Rectangle, 101, 101, 0.05, 0.05)
            .unwrap()
            .with_origin(-2.5, -2.5);
        let m = MetricState::background(c);
        let one = ScalarField::constant(&m.chart, 1.0);
        let r = gradient_log_harmonic_check(&one, &m, 0.0, 1.0, (50, 50)).unwrap();
        assert!(r.passed && r.lhs == 0.0);
        let lin = ScalarField::from_fn(&m.chart, |s, _| 1.0 + 0.1 * s);
        let r = gradient_log_harmonic_check(&lin, &m, 0.0, 1.0, (50, 50)).unwrap();
        assert!(r.passed);
        assert!((r.lhs - 0.01 / 0.81).abs() < 1e-3, "{}", r.lhs);
        let bump = ScalarField::from_fn(&m.chart, |s, t| 2.0 + s * s + t * t);
        assert!(matches!(
            gradient_log_harmonic_check(&bump, &m, 0.0, 0.5, (50, 50)),
            Err(Error::Precondition(_))
        ));
    }
}
