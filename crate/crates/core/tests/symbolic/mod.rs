//! Brute-force expansion of the collar equation in ρ, shared by the collar
//! tests and the acceptance suite.
//!
//! The oracle never forms `F`. It substitutes `ρ = rη` into
//! `A²(ρρ_rr + 1 − ρ_r²) + ½AA_r ρρ_r − ½A_θ ρρ_θ + Aρρ_θθ − Aρ_θ² + (¼A_r² − ½AA_rr)ρ²`,
//! which is the collar equation multiplied by `A²` and free of quotients, on
//! dense `(r power, log power, mode)` arrays. Dividing by `A²η` with plain long
//! division then gives `(D² − D − 2)η + F`.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use ricci_core::collar::{FermiBackground, FourierPoly, LogPowerSeries};

pub const MB: i64 = 24;

/// Exact polynomial in `r`, `log r` and `e^{iθ}` with levels `0..=lv`.
#[derive(Clone)]
pub struct Dense {
    pub lv: usize,
    pub c: Vec<C>,
}

impl Dense {
    pub fn zero(lv: usize) -> Self {
        let w = (2 * MB + 1) as usize;
        Self { lv, c: vec![C::new(0.0, 0.0); (lv + 1) * (lv + 1) * w] }
    }
    pub fn idx(&self, i: usize, j: usize, m: i64) -> usize {
        let w = (2 * MB + 1) as usize;
        (i * (self.lv + 1) + j) * w + (m + MB) as usize
    }
    pub fn get(&self, i: usize, j: usize, m: i64) -> C {
        self.c[self.idx(i, j, m)]
    }
    pub fn bump(&mut self, i: usize, j: usize, m: i64, v: C) {
        let k = self.idx(i, j, m);
        self.c[k] += v;
    }
    pub fn terms(&self) -> Vec<(usize, usize, i64, C)> {
        let mut out = Vec::new();
        for i in 0..=self.lv {
            for j in 0..=self.lv {
                for m in -MB..=MB {
                    let v = self.get(i, j, m);
                    if v.norm() != 0.0 {
                        out.push((i, j, m, v));
                    }
                }
            }
        }
        out
    }
    pub fn mul(&self, o: &Self) -> Self {
        let lv = self.lv.min(o.lv);
        let mut out = Self::zero(lv);
        let b = o.terms();
        for (i1, j1, m1, v1) in self.terms() {
            for &(i2, j2, m2, v2) in &b {
                if i1 + i2 <= lv {
                    assert!((m1 + m2).abs() <= MB && j1 + j2 <= lv, "oracle range exceeded");
                    out.bump(i1 + i2, j1 + j2, m1 + m2, v1 * v2);
                }
            }
        }
        out
    }
    pub fn lin(&self, o: &Self, a: f64, b: f64) -> Self {
        let lv = self.lv.min(o.lv);
        let mut out = Self::zero(lv);
        for i in 0..=lv {
            for j in 0..=lv {
                for m in -MB..=MB {
                    out.bump(i, j, m, self.get(i, j, m) * a + o.get(i, j, m) * b);
                }
            }
        }
        out
    }
    pub fn scale(&self, a: f64) -> Self {
        self.lin(self, a, 0.0)
    }
    /// `∂_r(r^i L^j) = r^{i−1}(i L^j + j L^{j−1})`.
    pub fn dr(&self) -> Self {
        let mut out = Self::zero(self.lv - 1);
        for (i, j, m, v) in self.terms() {
            if i == 0 {
                assert!(j == 0, "r⁰ log r term has no derivative in the class");
                continue;
            }
            out.bump(i - 1, j, m, v * i as f64);
            if j > 0 {
                out.bump(i - 1, j - 1, m, v * j as f64);
            }
        }
        out
    }
    pub fn dth(&self) -> Self {
        let mut out = Self::zero(self.lv);
        for (i, j, m, v) in self.terms() {
            out.bump(i, j, m, v * C::new(0.0, m as f64));
        }
        out
    }
    /// Multiplication by `r`, keeping the level range.
    pub fn shift(&self) -> Self {
        let mut out = Self::zero(self.lv);
        for (i, j, m, v) in self.terms() {
            if i < self.lv {
                out.bump(i + 1, j, m, v);
            }
        }
        out
    }
    /// Long division `self / g` level by level; `g`'s r⁰ level must be a
    /// nonzero constant.
    pub fn div(&self, g: &Self) -> Self {
        let lv = self.lv.min(g.lv);
        let g0 = g.get(0, 0, 0);
        for (i, j, m, _) in g.terms() {
            assert!(i > 0 || (j == 0 && m == 0));
        }
        let mut q = Self::zero(lv);
        let gt = g.terms();
        for k in 0..=lv {
            let mut acc = Self::zero(lv);
            for j in 0..=lv {
                for m in -MB..=MB {
                    acc.bump(k, j, m, self.get(k, j, m));
                }
            }
            for &(gi, gj, gm, gv) in &gt {
                if gi == 0 || gi > k {
                    continue;
                }
                for j in 0..=lv {
                    for m in -MB..=MB {
                        let qv = q.get(k - gi, j, m);
                        if qv.norm() != 0.0 {
                            acc.bump(k, j + gj, m + gm, -gv * qv);
                        }
                    }
                }
            }
            for j in 0..=lv {
                for m in -MB..=MB {
                    let v = acc.get(k, j, m) / g0;
                    q.bump(k, j, m, v);
                }
            }
        }
        q
    }
}

pub fn from_poly(d: &mut Dense, i: usize, j: usize, p: &FourierPoly) {
    let cap = p.cap() as i64;
    for m in -cap..=cap {
        d.bump(i, j, m, p.mode(m));
    }
}

pub fn warp_dense(bg: &FermiBackground, lv: usize) -> Dense {
    let mut d = Dense::zero(lv);
    for i in 0..=bg.order().min(lv) {
        from_poly(&mut d, i, 0, bg.a.coeff(i, 0));
    }
    d
}

/// `η` with every level `≥ below` dropped.
pub fn eta_dense(eta: &LogPowerSeries, below: usize, lv: usize) -> Dense {
    let mut d = Dense::zero(lv);
    for i in 0..below.min(eta.order() + 1) {
        for j in 0..=i {
            from_poly(&mut d, i, j, &eta.a(i, j));
        }
    }
    d
}

/// The cleared collar expression `A²·(K₀ + 1)` through level `lv`.
pub fn cleared(eta: &Dense, a: &Dense) -> Dense {
    let rho = eta.shift();
    let (rr, rrr) = (rho.dr(), rho.dr().dr());
    let (rt, rtt) = (rho.dth(), rho.dth().dth());
    let (ar, arr, at) = (a.dr(), a.dr().dr(), a.dth());
    let a2 = a.mul(a);
    let mut one = Dense::zero(eta.lv);
    one.bump(0, 0, 0, C::new(1.0, 0.0));
    let core = rho.mul(&rrr).lin(&one, 1.0, 1.0).lin(&rr.mul(&rr), 1.0, -1.0);
    a2.mul(&core)
        .lin(&a.mul(&ar).mul(&rho).mul(&rr), 1.0, 0.5)
        .lin(&at.mul(&rho).mul(&rt), 1.0, -0.5)
        .lin(&a.mul(&rho).mul(&rtt), 1.0, 1.0)
        .lin(&a.mul(&rt).mul(&rt), 1.0, -1.0)
        .lin(&ar.mul(&ar).scale(0.25).lin(&a.mul(&arr), 1.0, -0.5).mul(&rho).mul(&rho), 1.0, 1.0)
}

/// `(D² − D − 2)η + F` through level `lv`, for η truncated below `below`.
pub fn oracle_equation(eta: &LogPowerSeries, bg: &FermiBackground, below: usize, lv: usize) -> Dense {
    // Padding by two levels keeps every derivative exact through `lv`.
    let e = eta_dense(eta, below, lv + 2);
    let a = warp_dense(bg, lv + 2);
    let p = cleared(&e, &a);
    let g = a.mul(&a).mul(&e);
    p.div(&g)
}

pub fn level_gap(lib: &[FourierPoly], oracle: &Dense, k: usize) -> (f64, f64) {
    let mut gap = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..=k {
        for m in -MB..=MB {
            let l = lib.get(j).map_or(C::new(0.0, 0.0), |p| p.mode(m));
            let o = oracle.get(k, j, m);
            gap = gap.max((l - o).norm());
            scale = scale.max(o.norm());
        }
    }
    (gap, scale)
}
