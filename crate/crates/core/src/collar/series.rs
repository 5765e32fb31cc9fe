//! Truncated series in `r^i (log r)^j` with Fourier coefficients in θ.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fourier::FourierPoly;
use crate::{Error, Result};

/// `Σ_{i ≤ order} Σ_{j ≤ i} c_{ij}(θ) r^i (log r)^j`, known exactly through
/// level `order`.
///
/// Arithmetic keeps the level structure: a product is truncated at the lower
/// of the two orders, `r·S` gains a level and `S/r` loses one. Modes beyond the
/// Fourier cap are dropped; [`truncation`](Self::truncation) reports the
/// largest ℓ¹ mass discarded by any single product in the series' history.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSeries {
    order: usize,
    cap: usize,
    levels: Vec<Vec<FourierPoly>>,
    truncation: f64,
}

impl LogSeries {
    pub fn zero(order: usize, cap: usize) -> Self {
        Self {
            order,
            cap,
            levels: (0..=order).map(|i| vec![FourierPoly::zero(cap); i + 1]).collect(),
            truncation: 0.0,
        }
    }

    pub fn constant(value: f64, order: usize, cap: usize) -> Self {
        let mut s = Self::zero(order, cap);
        s.levels[0][0] = FourierPoly::constant(value, cap);
        s
    }

    /// Plain power series `Σ c_i(θ) r^i`; the order is `coeffs.len() − 1`.
    pub fn power_series(coeffs: Vec<FourierPoly>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::InvalidArgument("a power series needs at least one coefficient".into()));
        };
        let cap = first.cap();
        if coeffs.iter().any(|c| c.cap() != cap) {
            return Err(Error::InvalidArgument("power series coefficients must share a mode cap".into()));
        }
        let mut s = Self::zero(coeffs.len() - 1, cap);
        for (i, c) in coeffs.into_iter().enumerate() {
            s.levels[i][0] = c;
        }
        Ok(s)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Largest ℓ¹ mass of Fourier modes dropped at the cap by one product.
    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn level(&self, i: usize) -> &[FourierPoly] {
        &self.levels[i]
    }

    pub fn coeff(&self, i: usize, j: usize) -> &FourierPoly {
        &self.levels[i][j]
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, p: FourierPoly) -> Result<()> {
        if i > self.order || j > i {
            return Err(Error::InvalidArgument(format!(
                "coefficient ({i}, {j}) outside the shape of an order-{} series",
                self.order
            )));
        }
        if p.cap() != self.cap {
            return Err(Error::InvalidArgument("mode cap mismatch".into()));
        }
        self.levels[i][j] = p;
        Ok(())
    }

    /// Replaces level `i`; missing log powers are zero.
    pub fn set_level(&mut self, i: usize, coeffs: Vec<FourierPoly>) -> Result<()> {
        if coeffs.len() > i + 1 {
            return Err(Error::InvalidArgument(format!(
                "level {i} carries log powers up to {i}, got {}",
                coeffs.len() - 1
            )));
        }
        for j in 0..=i {
            self.levels[i][j] = FourierPoly::zero(self.cap);
        }
        for (j, c) in coeffs.into_iter().enumerate() {
            self.set_coeff(i, j, c)?;
        }
        Ok(())
    }

    pub fn truncated(&self, order: usize) -> Self {
        let order = order.min(self.order);
        Self {
            order,
            cap: self.cap,
            levels: self.levels[..=order].to_vec(),
            truncation: self.truncation,
        }
    }

    /// Same order with levels `≥ k` zeroed.
    pub fn masked_from(&self, k: usize) -> Self {
        let mut s = self.clone();
        for i in k..=self.order {
            for c in &mut s.levels[i] {
                *c = FourierPoly::zero(self.cap);
            }
        }
        s
    }

    /// Zero-padded to a higher order. The padded levels are *not* known; the
    /// caller takes responsibility for their meaning.
    pub fn padded(&self, order: usize) -> Self {
        let mut s = Self::zero(order.max(self.order), self.cap);
        for i in 0..=self.order {
            s.levels[i] = self.levels[i].clone();
        }
        s.truncation = self.truncation;
        s
    }

    pub fn is_finite(&self) -> bool {
        self.levels.iter().flatten().all(FourierPoly::is_finite)
    }

    /// Largest coefficient modulus on level `i`.
    pub fn level_max_abs(&self, i: usize) -> f64 {
        self.levels[i].iter().map(FourierPoly::max_abs).fold(0.0, f64::max)
    }

    /// Highest power of `log r` with a nonzero coefficient on level `i`.
    pub fn max_log_power(&self, i: usize) -> Option<usize> {
        (0..=i).rev().find(|&j| !self.levels[i][j].is_zero())
    }

    fn binary(&self, other: &Self, f: impl Fn(&FourierPoly, &FourierPoly) -> FourierPoly) -> Self {
        debug_assert_eq!(self.cap, other.cap);
        let order = self.order.min(other.order);
        Self {
            order,
            cap: self.cap,
            levels: (0..=order)
                .map(|i| (0..=i).map(|j| f(&self.levels[i][j], &other.levels[i][j])).collect())
                .collect(),
            truncation: self.truncation.max(other.truncation),
        }
    }

    fn unary(&self, f: impl Fn(&FourierPoly) -> FourierPoly) -> Self {
        Self {
            order: self.order,
            cap: self.cap,
            levels: self.levels.iter().map(|l| l.iter().map(&f).collect()).collect(),
            truncation: self.truncation,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.binary(other, FourierPoly::add)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.binary(other, FourierPoly::sub)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.unary(|p| p.scale(k))
    }

    /// Cauchy product through the lower of the two orders.
    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cap, other.cap);
        let order = self.order.min(other.order);
        let mut out = Self::zero(order, self.cap);
        let mut dropped_total = 0.0;
        for i1 in 0..=order {
            for (j1, a) in self.levels[i1].iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for i2 in 0..=order - i1 {
                    for (j2, b) in other.levels[i2].iter().enumerate() {
                        if b.is_zero() {
                            continue;
                        }
                        let (p, dropped) = a.mul(b);
                        out.levels[i1 + i2][j1 + j2].add_assign(&p);
                        dropped_total += dropped;
                    }
                }
            }
        }
        out.truncation = self.truncation.max(other.truncation).max(dropped_total);
        out
    }

    /// `r·S`, one level more.
    pub fn mul_r(&self) -> Self {
        let mut out = Self::zero(self.order + 1, self.cap);
        out.truncation = self.truncation;
        for i in 0..=self.order {
            for j in 0..=i {
                out.levels[i + 1][j] = self.levels[i][j].clone();
            }
        }
        out
    }

    /// `S/r`, one level less; level 0 must vanish.
    pub fn div_r(&self) -> Result<Self> {
        if self.order == 0 {
            return Err(Error::InvalidArgument("cannot divide an order-0 series by r".into()));
        }
        if self.levels[0].iter().any(|p| !p.is_zero()) {
            return Err(Error::InvalidArgument("series has a nonzero r⁰ level".into()));
        }
        let mut out = Self::zero(self.order - 1, self.cap);
        out.truncation = self.truncation;
        for i in 1..=self.order {
            for j in 0..i {
                out.levels[i - 1][j] = self.levels[i][j].clone();
            }
            if !self.levels[i][i].is_zero() {
                return Err(Error::InvalidArgument(format!(
                    "r^{i}·log^{i} r divided by r leaves the series shape"
                )));
            }
        }
        Ok(out)
    }

    /// Euler operator `D = r∂_r`: `r^i L^j ↦ i r^i L^j + j r^i L^{j−1}`.
    pub fn euler(&self) -> Self {
        let mut out = Self::zero(self.order, self.cap);
        out.truncation = self.truncation;
        for i in 0..=self.order {
            for j in 0..=i {
                let mut c = self.levels[i][j].scale(i as f64);
                if j < i {
                    c.add_assign(&self.levels[i][j + 1].scale((j + 1) as f64));
                }
                out.levels[i][j] = c;
            }
        }
        out
    }

    /// `∂_r`, one level less.
    pub fn d_r(&self) -> Result<Self> {
        self.euler().div_r()
    }

    pub fn d_theta(&self) -> Self {
        self.unary(FourierPoly::d_theta)
    }

    pub fn d_theta2(&self) -> Self {
        self.unary(FourierPoly::d_theta2)
    }

    /// `1/S` by Newton iteration `x ← x(2 − S x)`, exact through the order.
    /// The `r⁰` coefficient must be a nonzero constant.
    pub fn inverse(&self) -> Result<Self> {
        let c0 = &self.levels[0][0];
        let a0 = c0.mode(0);
        if !c0.is_constant() || a0.im != 0.0 || a0.re == 0.0 {
            return Err(Error::InvalidArgument(
                "series inversion needs a nonzero, θ-independent r⁰ coefficient".into(),
            ));
        }
        let two = Self::constant(2.0, self.order, self.cap);
        let mut x = Self::constant(1.0 / a0.re, self.order, self.cap);
        let mut exact = 1usize;
        while exact <= self.order {
            x = x.mul(&two.sub(&self.mul(&x)));
            exact *= 2;
        }
        Ok(x)
    }

    /// Value at `(r, θ)`; at `r = 0` only the `r⁰` level survives.
    pub fn eval(&self, r: f64, theta: f64) -> f64 {
        if r == 0.0 {
            return self.levels[0][0].eval(theta);
        }
        let l = r.ln();
        let mut acc = 0.0;
        let mut ri = 1.0;
        for i in 0..=self.order {
            let mut lj = 1.0;
            for c in &self.levels[i] {
                if !c.is_zero() {
                    acc += c.eval(theta) * ri * lj;
                }
                lj *= l;
            }
            ri *= r;
        }
        acc
    }
}

/// The unknown `η = ρ/r` of the collar problem: a [`LogSeries`] whose `r⁰`
/// level is the constant 1.
#[derive(Clone, Debug, PartialEq)]
pub struct LogPowerSeries {
    series: LogSeries,
}

#[derive(Serialize, Deserialize)]
struct SeriesDump {
    #[serde(rename = "N")]
    n: usize,
    modes: usize,
    /// `a[i−1][j]` lists the coefficients of modes `−modes..=modes` as `[re, im]`.
    a: Vec<Vec<Vec<[f64; 2]>>>,
}

impl LogPowerSeries {
    /// `η ≡ 1` through level `order`.
    pub fn unit(order: usize, cap: usize) -> Self {
        Self {
            series: LogSeries::constant(1.0, order, cap),
        }
    }

    pub fn from_series(series: LogSeries) -> Result<Self> {
        let l0 = &series.levels[0][0];
        if !l0.is_constant() || l0.mode(0) != Complex64::new(1.0, 0.0) {
            return Err(Error::InvalidArgument("η must equal 1 at r = 0".into()));
        }
        Ok(Self { series })
    }

    /// Truncation order `N`.
    pub fn order(&self) -> usize {
        self.series.order
    }

    pub fn cap(&self) -> usize {
        self.series.cap
    }

    pub fn series(&self) -> &LogSeries {
        &self.series
    }

    /// `a_{ij}(θ)`; zero outside `j ≤ i ≤ N`.
    pub fn a(&self, i: usize, j: usize) -> FourierPoly {
        if i > self.order() || j > i {
            return FourierPoly::zero(self.cap());
        }
        self.series.levels[i][j].clone()
    }

    /// Overwrites level `k ≥ 1`.
    pub fn set_level(&mut self, k: usize, coeffs: Vec<FourierPoly>) -> Result<()> {
        if k == 0 || k > self.order() {
            return Err(Error::LevelOutOfRange { level: k, order: self.order() });
        }
        self.series.set_level(k, coeffs)
    }

    /// ℓ¹ mass of Fourier modes dropped at the cap while building the series.
    pub fn truncation(&self) -> f64 {
        self.series.truncation
    }

    pub(crate) fn set_truncation(&mut self, t: f64) {
        self.series.truncation = t;
    }

    pub fn eval(&self, r: f64, theta: f64) -> f64 {
        self.series.eval(r, theta)
    }

    pub fn to_json(&self) -> Result<String> {
        let dump = SeriesDump {
            n: self.order(),
            modes: self.cap(),
            a: (1..=self.order())
                .map(|i| {
                    self.series.levels[i]
                        .iter()
                        .map(|p| p.coeffs().iter().map(|c| [c.re, c.im]).collect())
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string_pretty(&dump).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: SeriesDump = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if dump.a.len() != dump.n {
            return Err(Error::Format(format!("expected {} levels, found {}", dump.n, dump.a.len())));
        }
        let mut eta = Self::unit(dump.n, dump.modes);
        for (idx, level) in dump.a.into_iter().enumerate() {
            let coeffs = level
                .into_iter()
                .map(|modes| {
                    if modes.len() != 2 * dump.modes + 1 {
                        return Err(Error::Format(format!("expected {} modes", 2 * dump.modes + 1)));
                    }
                    FourierPoly::from_coeffs(modes.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
                })
                .collect::<Result<Vec<_>>>()?;
            eta.set_level(idx + 1, coeffs).map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(eta)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cst(v: f64) -> FourierPoly {
        FourierPoly::constant(v, 2)
    }

    #[test]
    fn inverse_of_one_plus_r() {
        let s = LogSeries::power_series(vec![cst(1.0), cst(1.0)]).unwrap().padded(6);
        let inv = s.inverse().unwrap();
        for i in 0..=6 {
            let expected = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(inv.coeff(i, 0).mode(0).re, expected);
        }
        let one = s.mul(&inv);
        for i in 1..=6 {
            assert_eq!(one.level_max_abs(i), 0.0);
        }
    }

    #[test]
    fn euler_operator_on_log_terms() {
        let mut s = LogSeries::zero(3, 2);
        s.set_coeff(2, 1, cst(1.0)).unwrap();
        // D(r² log r) = 2 r² log r + r²
        let d = s.euler();
        assert_eq!(d.coeff(2, 1).mode(0).re, 2.0);
        assert_eq!(d.coeff(2, 0).mode(0).re, 1.0);
        let r: f64 = 0.3;
        let direct = r * r * (2.0 * r.ln() + 1.0);
        assert!((d.eval(r, 0.0) - direct).abs() < 1e-15);
    }

    #[test]
    fn r_shifts_round_trip() {
        let s = LogSeries::power_series(vec![cst(2.0), cst(-1.0), cst(0.5)]).unwrap();
        let back = s.mul_r().div_r().unwrap();
        assert_eq!(back, s);
        assert!(s.div_r().is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut eta = LogPowerSeries::unit(3, 1);
        let p = FourierPoly::from_modes(&[(1, Complex64::new(0.25, -0.5)), (-1, Complex64::new(0.25, 0.5))], 1).unwrap();
        eta.set_level(2, vec![p.clone(), p]).unwrap();
        let text = eta.to_json().unwrap();
        assert!(text.contains("\"N\": 3"));
        assert_eq!(LogPowerSeries::from_json(&text).unwrap(), eta);
        assert!(eta.set_level(0, vec![]).is_err());
    }

}
