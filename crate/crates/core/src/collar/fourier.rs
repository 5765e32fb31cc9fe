//! Finite Fourier series in θ with a fixed mode cap.

use num_complex::Complex64;

use crate::{Error, Result};

/// Default number of retained modes on each side of zero.
pub const DEFAULT_MODE_CAP: usize = 8;

/// `Σ_{|m| ≤ cap} c_m e^{imθ}`.
///
/// Products that would create modes beyond the cap drop them and report the
/// discarded ℓ¹ mass, which bounds the sup-norm error of the truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierPoly {
    cap: usize,
    coeffs: Vec<Complex64>,
}

impl FourierPoly {
    pub fn zero(cap: usize) -> Self {
        Self {
            cap,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * cap + 1],
        }
    }

    pub fn constant(value: f64, cap: usize) -> Self {
        let mut p = Self::zero(cap);
        p.coeffs[cap] = Complex64::new(value, 0.0);
        p
    }

    /// Builds a series from `(m, c_m)` pairs; modes beyond the cap are an error.
    pub fn from_modes(modes: &[(i64, Complex64)], cap: usize) -> Result<Self> {
        let mut p = Self::zero(cap);
        for &(m, c) in modes {
            if m.unsigned_abs() as usize > cap {
                return Err(Error::InvalidArgument(format!("mode {m} exceeds the cap {cap}")));
            }
            p.coeffs[(m + cap as i64) as usize] += c;
        }
        Ok(p)
    }

    /// Coefficients ordered from mode `−cap` to `cap`.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(Error::InvalidArgument("a Fourier series needs an odd number of coefficients".into()));
        }
        Ok(Self {
            cap: coeffs.len() / 2,
            coeffs,
        })
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn mode(&self, m: i64) -> Complex64 {
        if m.unsigned_abs() as usize > self.cap {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(m + self.cap as i64) as usize]
    }

    fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let cap = self.cap as i64;
        self.coeffs.iter().enumerate().map(move |(k, c)| (k as i64 - cap, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Whether only the zero mode is populated.
    pub fn is_constant(&self) -> bool {
        self.modes().all(|(m, c)| m == 0 || (c.re == 0.0 && c.im == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, c| a.max(c.norm()))
    }

    /// Largest modulus of `c_m − conj(c_{−m})`: zero for real-valued series.
    pub fn reality_defect(&self) -> f64 {
        self.modes()
            .map(|(m, c)| (c - self.mode(-m).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|_, c| c * k)
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.cap, other.cap);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    /// Convolution product and the ℓ¹ mass of the dropped modes.
    pub fn mul(&self, other: &Self) -> (Self, f64) {
        debug_assert_eq!(self.cap, other.cap);
        let cap = self.cap as i64;
        let mut out = Self::zero(self.cap);
        let mut dropped = vec![Complex64::new(0.0, 0.0); 4 * self.cap + 1];
        for (m, a) in self.modes() {
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            for (n, b) in other.modes() {
                let k = m + n;
                if k.abs() <= cap {
                    out.coeffs[(k + cap) as usize] += a * b;
                } else {
                    dropped[(k + 2 * cap) as usize] += a * b;
                }
            }
        }
        (out, dropped.iter().map(|c| c.norm()).sum())
    }

    /// `∂_θ`.
    pub fn d_theta(&self) -> Self {
        self.map(|m, c| c * Complex64::new(0.0, m as f64))
    }

    /// `∂²_θ`.
    pub fn d_theta2(&self) -> Self {
        self.map(|m, c| c * -((m * m) as f64))
    }

    /// Real part of the series at `θ`.
    pub fn eval(&self, theta: f64) -> f64 {
        self.modes()
            .map(|(m, c)| {
                let (s, co) = (m as f64 * theta).sin_cos();
                c.re * co - c.im * s
            })
            .sum()
    }

    fn map(&self, f: impl Fn(i64, Complex64) -> Complex64) -> Self {
        Self {
            cap: self.cap,
            coeffs: self.modes().map(|(m, c)| f(m, c)).collect(),
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        debug_assert_eq!(self.cap, other.cap);
        Self {
            cap: self.cap,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(*a, *b)).collect(),
        }
    }
}
