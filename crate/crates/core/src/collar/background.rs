//! Fermi-coordinate backgrounds `h = dr² + A(r, θ) dθ²` near a boundary curve.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fourier::FourierPoly;
use super::series::LogSeries;
use crate::{Error, Result};

/// The background metric `dr² + A dθ²` with `A` a polynomial in `r` of the
/// given order, and the coefficients of its Laplacian
/// `Δ = ∂²_r + B ∂_r + C ∂_θ + D ∂²_θ` and Gaussian curvature `K`:
///
/// `B = A_r/2A`, `C = −A_θ/2A²`, `D = 1/A`, `K = −A_rr/2A + A_r²/4A²`.
///
/// `A(0, θ)` must be a positive constant, i.e. θ is proportional to arclength
/// along the boundary curve. The derived series are exact through
/// `order − 1` (`B`), `order` (`C`, `D`) and `order − 2` (`K`), which is what
/// the recursion consumes at level `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct FermiBackground {
    pub a: LogSeries,
    pub b: LogSeries,
    pub c: LogSeries,
    pub d: LogSeries,
    pub k: LogSeries,
}

impl FermiBackground {
    pub fn new(a: LogSeries) -> Result<Self> {
        let order = a.order();
        if order < 2 {
            return Err(Error::InvalidArgument("the warp A needs at least order 2".into()));
        }
        for i in 0..=order {
            if a.max_log_power(i).is_some_and(|j| j > 0) {
                return Err(Error::InvalidArgument("the warp A must be a plain power series in r".into()));
            }
        }
        let a0 = a.coeff(0, 0);
        if !a0.is_constant() || !(a0.mode(0).re > 0.0) || a0.mode(0).im != 0.0 {
            return Err(Error::InvalidArgument(
                "A(0, θ) must be a positive constant (θ proportional to boundary arclength)".into(),
            ));
        }
        if !a.is_finite() {
            return Err(Error::InvalidArgument("warp coefficients must be finite".into()));
        }
        let inv = a.inverse()?;
        let a_r = a.d_r()?;
        let a_rr = a_r.d_r()?;
        let b = a_r.mul(&inv).scale(0.5);
        let c = a.d_theta().mul(&inv).mul(&inv).scale(-0.5);
        let (ar_k, inv_k) = (a_r.truncated(order - 2), inv.truncated(order - 2));
        let k = a_rr
            .mul(&inv_k)
            .scale(-0.5)
            .add(&ar_k.mul(&ar_k).mul(&inv_k).mul(&inv_k).scale(0.25));
        Ok(Self { a, b, c, d: inv, k })
    }

    /// Background truncation order: the highest level the recursion can reach.
    pub fn order(&self) -> usize {
        self.a.order()
    }

    pub fn cap(&self) -> usize {
        self.a.cap()
    }

    /// `A ≡ 1`: the flat half-cylinder, on which `ρ = r` is exact.
    pub fn flat(order: usize, cap: usize) -> Result<Self> {
        Self::radial(&[1.0], order, cap)
    }

    /// θ-independent `A = Σ coeffs[i] r^i`, zero-padded to `order`.
    pub fn radial(coeffs: &[f64], order: usize, cap: usize) -> Result<Self> {
        if coeffs.len() > order + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} warp coefficients do not fit order {order}",
                coeffs.len()
            )));
        }
        let mut polys: Vec<FourierPoly> = coeffs.iter().map(|&v| FourierPoly::constant(v, cap)).collect();
        polys.resize(order + 1, FourierPoly::zero(cap));
        Self::new(LogSeries::power_series(polys)?)
    }

    /// `A = (1 + r)²`: the flat exterior of the unit disc in Fermi coordinates.
    pub fn disc_exterior(order: usize, cap: usize) -> Result<Self> {
        Self::radial(&[1.0, 2.0, 1.0], order, cap)
    }

    /// `A = 1 + r·sin²θ`.
    pub fn sine_squared(order: usize, cap: usize) -> Result<Self> {
        let q = Complex64::new(-0.25, 0.0);
        let s2 = FourierPoly::from_modes(&[(0, Complex64::new(0.5, 0.0)), (2, q), (-2, q)], cap)?;
        let mut polys = vec![FourierPoly::constant(1.0, cap), s2];
        polys.resize(order + 1, FourierPoly::zero(cap));
        Self::new(LogSeries::power_series(polys)?)
    }

    /// `A = 1 + Σ_{i ≥ 1} r^i a_i(θ)` with real-valued random coefficients in
    /// modes `|m| ≤ modes`, each component uniform in `[−amplitude, amplitude]`.
    pub fn random(seed: u64, order: usize, cap: usize, modes: usize, amplitude: f64) -> Result<Self> {
        if modes > cap {
            return Err(Error::InvalidArgument(format!("{modes} random modes exceed the cap {cap}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut polys = vec![FourierPoly::constant(1.0, cap)];
        for _ in 1..=order {
            let mut list = vec![(0, Complex64::new(rng.gen_range(-amplitude..=amplitude), 0.0))];
            for m in 1..=modes as i64 {
                let c = Complex64::new(
                    rng.gen_range(-amplitude..=amplitude),
                    rng.gen_range(-amplitude..=amplitude),
                );
                list.push((m, c));
                list.push((-m, c.conj()));
            }
            polys.push(FourierPoly::from_modes(&list, cap)?);
        }
        Self::new(LogSeries::power_series(polys)?)
    }

    /// Whether `A` has no θ dependence.
    pub fn is_radial(&self) -> bool {
        (0..=self.order()).all(|i| self.a.coeff(i, 0).is_constant())
    }

    /// Pointwise `(A, A_r, A_rr, A_θ)` of the polynomial warp.
    pub fn warp_jet(&self, r: f64, theta: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..=self.order() {
            let c = self.a.coeff(i, 0);
            let (v, vt) = (c.eval(theta), c.d_theta().eval(theta));
            let fi = i as f64;
            out[0] += v * r.powi(i as i32);
            out[3] += vt * r.powi(i as i32);
            if i >= 1 {
                out[1] += fi * v * r.powi(i as i32 - 1);
            }
            if i >= 2 {
                out[2] += fi * (fi - 1.0) * v * r.powi(i as i32 - 2);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_exterior_coefficients() {
        let bg = FermiBackground::disc_exterior(6, 2).unwrap();
        // B = 1/(1+r), D = (1+r)^{-2}, K = 0.
        for i in 0..=5 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert!((bg.b.coeff(i, 0).mode(0).re - sign).abs() < 1e-14);
            assert!((bg.d.coeff(i, 0).mode(0).re - sign * (i + 1) as f64).abs() < 1e-13);
        }
        for i in 0..=4 {
            assert!(bg.k.level_max_abs(i) < 1e-13);
        }
        assert_eq!(bg.b.order(), 5);
        assert_eq!(bg.k.order(), 4);
    }

    #[test]
    fn warp_jet_matches_polynomial() {
        let bg = FermiBackground::random(3, 5, 4, 2, 0.3).unwrap();
        let (r, t) = (0.4, 1.3);
        let a = |r: f64| bg.a.eval(r, t);
        let e = 1e-4;
        let [v, vr, vrr, vt] = bg.warp_jet(r, t);
        assert!((v - a(r)).abs() < 1e-14);
        assert!((vr - (a(r + e) - a(r - e)) / (2.0 * e)).abs() < 1e-7);
        assert!((vrr - (a(r + e) - 2.0 * a(r) + a(r - e)) / (e * e)).abs() < 1e-5);
        let at = |t: f64| bg.a.eval(r, t);
        assert!((vt - (at(t + e) - at(t - e)) / (2.0 * e)).abs() < 1e-7);
    }

    #[test]
    fn rejects_varying_boundary_length() {
        let mut polys = vec![FourierPoly::from_modes(&[(0, Complex64::new(1.0, 0.0)), (1, Complex64::new(0.1, 0.0))], 2).unwrap()];
        polys.push(FourierPoly::zero(2));
        polys.push(FourierPoly::zero(2));
        assert!(FermiBackground::new(LogSeries::power_series(polys).unwrap()).is_err());
    }
}
