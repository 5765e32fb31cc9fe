//! Level-by-level formal solution of `(D² − D − 2)η + F[r, η] = 0`.
//!
//! With `ρ = rη` the collar equation
//! `ρρ_rr + Bρρ_r + Cρρ_θ + Dρρ_θθ + 1 − ρ_r² − A⁻¹ρ_θ² + ρ²K = 0`
//! divided by η becomes `(D² − D − 2)η + F = 0` with
//!
//! `F = Brη + Br²η_r + Cr²η_θ + Dr²η_θθ + (1 − η)²/η + 2 − (rη_r)²/η − A⁻¹r²η_θ²/η + ηr²K`.
//!
//! The constant 2 in `F` cancels the image of the level-0 term,
//! `(D² − D − 2)·1 = −2`, so level 0 holds identically and the series
//! computed here omit it. Every other term of `F` at level `k` involves η only
//! through levels below `k`.

use super::background::FermiBackground;
use super::fourier::FourierPoly;
use super::series::{LogPowerSeries, LogSeries};
use crate::{Error, Result};

/// `(D² − D − 2)S` with `D = r∂_r`, exactly on coefficients.
pub fn indicial_apply(s: &LogSeries) -> LogSeries {
    let d = s.euler();
    d.euler().sub(&d).sub(&s.scale(2.0))
}

/// `F[r, η] − 2` through level `order`, reading every level of `eta` up to
/// `order`.
pub fn fuchsian_series(eta: &LogSeries, bg: &FermiBackground, order: usize) -> Result<LogSeries> {
    if order == 0 || order > bg.order() {
        return Err(Error::LevelOutOfRange { level: order, order: bg.order() });
    }
    if order > eta.order() {
        return Err(Error::LevelOutOfRange { level: order, order: eta.order() });
    }
    let cap = eta.cap();
    if cap != bg.cap() {
        return Err(Error::InvalidArgument(format!(
            "η uses mode cap {cap}, the background {}",
            bg.cap()
        )));
    }
    let e = eta.truncated(order);
    let inv = e.inverse()?;
    let de = e.euler();
    let (et, ett) = (e.d_theta(), e.d_theta2());
    let b = bg.b.truncated(order - 1);
    let c = bg.c.truncated(order);
    let d = bg.d.truncated(order);
    let k = bg.k.truncated(order.saturating_sub(2));
    let one_minus = LogSeries::constant(1.0, order, cap).sub(&e);

    let linear_b = b.mul(&e.add(&de)).mul_r();
    let angular = c.mul(&et).add(&d.mul(&ett)).mul_r().mul_r();
    let quadratic = one_minus.mul(&one_minus).sub(&de.mul(&de)).mul(&inv);
    let gradient = d.mul(&et.mul(&et)).mul(&inv).mul_r().mul_r();
    let curvature = k.mul(&e).mul_r().mul_r();
    let f = linear_b
        .add(&angular)
        .add(&quadratic)
        .sub(&gradient)
        .add(&curvature)
        .truncated(order);
    debug_assert_eq!(f.order(), order);
    Ok(f)
}

fn f_level(eta: &LogPowerSeries, bg: &FermiBackground, k: usize) -> Result<(Vec<FourierPoly>, f64)> {
    if k == 0 || k > bg.order() {
        return Err(Error::LevelOutOfRange { level: k, order: bg.order() });
    }
    if k > eta.order() + 1 {
        return Err(Error::LevelOutOfRange { level: k, order: eta.order() + 1 });
    }
    let known = eta.series().padded(k).masked_from(k).truncated(k);
    let f = fuchsian_series(&known, bg, k)?;
    Ok((f.level(k).to_vec(), f.truncation()))
}

/// Level `k` of `F[r, η]`, computed from the levels of η below `k` only.
pub fn fuchsian_f(eta: &LogPowerSeries, bg: &FermiBackground, k: usize) -> Result<Vec<FourierPoly>> {
    Ok(f_level(eta, bg, k)?.0)
}

/// Solves `(D² − D − 2)η_k = −source` on `span{r^k log^j r}`.
///
/// On level `k` the operator is `(k² − k − 2)` plus a nilpotent shift in `j`.
/// Away from the indicial root `k = 2` it is inverted by back-substitution
/// from the highest log power. At `k = 2` the top log power rises by one and
/// the pure `r²` coefficient, which is free, is set to zero.
pub fn solve_level(k: usize, source: &[FourierPoly]) -> Result<Vec<FourierPoly>> {
    if k == 0 {
        return Err(Error::InvalidArgument("level 0 of η is fixed at 1".into()));
    }
    let Some(first) = source.first() else {
        return Err(Error::InvalidArgument("empty source level".into()));
    };
    let cap = first.cap();
    let top = match (0..source.len()).rev().find(|&j| !source[j].is_zero()) {
        Some(j) => j,
        None => return Ok(vec![FourierPoly::zero(cap); k + 1]),
    };
    let kf = k as f64;
    let p = kf * kf - kf - 2.0;
    let q = 2.0 * kf - 1.0;
    let rhs: Vec<FourierPoly> = source.iter().map(|c| c.scale(-1.0)).collect();
    let mut a = vec![FourierPoly::zero(cap); k + 1];
    // (D² − D − 2) Σ a_j r^k L^j has L^j coefficient
    // p·a_j + q(j+1)·a_{j+1} + (j+2)(j+1)·a_{j+2}.
    let at = |a: &[FourierPoly], j: usize| a.get(j).cloned().unwrap_or_else(|| FourierPoly::zero(cap));
    if k != 2 {
        if top > k {
            return Err(Error::Precondition(format!("level-{k} source carries log^{top} r")));
        }
        for j in (0..=top).rev() {
            let t = rhs[j]
                .sub(&at(&a, j + 1).scale(q * (j + 1) as f64))
                .sub(&at(&a, j + 2).scale(((j + 2) * (j + 1)) as f64));
            a[j] = t.scale(1.0 / p);
        }
    } else {
        if top + 1 > k {
            return Err(Error::Precondition(format!(
                "resonant level-2 source carries log^{top} r; the solution would leave the expansion shape"
            )));
        }
        for j in (0..=top).rev() {
            let t = rhs[j].sub(&at(&a, j + 2).scale(((j + 2) * (j + 1)) as f64));
            a[j + 1] = t.scale(1.0 / (q * (j + 1) as f64));
        }
    }
    Ok(a)
}

/// Formal solution through level `n`: `η(0, θ) = 1` and each level from the
/// ones below it.
pub fn build_eta(bg: &FermiBackground, n: usize) -> Result<LogPowerSeries> {
    if n > bg.order() {
        return Err(Error::LevelOutOfRange { level: n, order: bg.order() });
    }
    let mut eta = LogPowerSeries::unit(n, bg.cap());
    for k in 1..=n {
        let (source, truncation) = f_level(&eta, bg, k)?;
        let level = solve_level(k, &source)?;
        eta.set_level(k, level)?;
        eta.set_truncation(eta.truncation().max(truncation));
    }
    if !eta.series().is_finite() {
        return Err(Error::Precondition("η has non-finite coefficients".into()));
    }
    Ok(eta)
}

/// `max |indicial_apply(η)_k + F_k|` over the coefficients of each level
/// `k = 1..=N`.
pub fn recursion_residual(eta: &LogPowerSeries, bg: &FermiBackground) -> Result<Vec<f64>> {
    let image = indicial_apply(eta.series());
    (1..=eta.order())
        .map(|k| {
            let f = fuchsian_f(eta, bg, k)?;
            Ok(image
                .level(k)
                .iter()
                .zip(&f)
                .map(|(a, b)| a.add(b).max_abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cst(v: f64) -> FourierPoly {
        FourierPoly::constant(v, 2)
    }

    fn monomial(i: usize, j: usize, v: f64) -> LogSeries {
        let mut s = LogSeries::zero(i, 2);
        s.set_coeff(i, j, cst(v)).unwrap();
        s
    }

    #[test]
    fn indicial_examples() {
        assert_eq!(indicial_apply(&monomial(3, 0, 1.0)).coeff(3, 0).mode(0).re, 4.0);
        assert!(indicial_apply(&monomial(2, 0, 1.0)).level_max_abs(2) == 0.0);
        let img = indicial_apply(&monomial(2, 1, 1.0));
        assert_eq!(img.coeff(2, 0).mode(0).re, 3.0);
        assert_eq!(img.coeff(2, 1).mode(0).re, 0.0);
    }

    #[test]
    fn solve_level_examples() {
        let c = 0.7;
        let one = solve_level(1, &[cst(c), cst(0.0)]).unwrap();
        assert_eq!(one[0].mode(0).re, c / 2.0);
        let two = solve_level(2, &[cst(c)]).unwrap();
        assert_eq!(two[0].mode(0).re, 0.0);
        assert!((two[1].mode(0).re + c / 3.0).abs() < 1e-16);
        assert!(solve_level(0, &[cst(1.0)]).is_err());
        assert!(solve_level(2, &[cst(0.0), cst(0.0), cst(1.0)]).is_err());
    }

    #[test]
    fn level_three_round_trip_with_logs() {
        let src = vec![cst(0.3), cst(-1.2), cst(0.5), cst(2.0)];
        let a = solve_level(3, &src).unwrap();
        let mut s = LogSeries::zero(3, 2);
        s.set_level(3, a).unwrap();
        let img = indicial_apply(&s);
        for j in 0..=3 {
            assert!((img.coeff(3, j).mode(0).re + src[j].mode(0).re).abs() <= 1e-12);
        }
    }

    #[test]
    fn flat_background_is_exact() {
        let bg = FermiBackground::flat(8, 4).unwrap();
        let eta = build_eta(&bg, 8).unwrap();
        assert_eq!(eta, LogPowerSeries::unit(8, 4));
        for k in 1..=8 {
            assert!(fuchsian_f(&eta, &bg, k).unwrap().iter().all(FourierPoly::is_zero));
        }
    }

    #[test]
    fn first_level_of_quadratic_term_vanishes() {
        let bg = FermiBackground::flat(3, 2).unwrap();
        let mut eta = LogPowerSeries::unit(3, 2);
        eta.set_level(1, vec![cst(0.8)]).unwrap();
        let f = fuchsian_series(eta.series(), &bg, 3).unwrap();
        assert!(f.level_max_abs(1) == 0.0);
        // Level 2 of (1 − η)²/η − (Dη)²/η is a₁² − a₁² = 0 as well.
        assert!(f.level_max_abs(2) < 1e-15);
    }

    #[test]
    fn disc_exterior_has_no_logs() {
        let bg = FermiBackground::disc_exterior(6, 2).unwrap();
        let eta = build_eta(&bg, 6).unwrap();
        assert!((eta.a(1, 0).mode(0).re - 0.5).abs() < 1e-15);
        for i in 1..=6 {
            assert!(eta.series().max_log_power(i).unwrap_or(0) == 0, "level {i}");
        }
        for res in recursion_residual(&eta, &bg).unwrap() {
            assert!(res <= 1e-12);
        }
        assert!(build_eta(&bg, 7).is_err());
        assert!(fuchsian_f(&eta, &bg, 7).is_err());
    }
}
