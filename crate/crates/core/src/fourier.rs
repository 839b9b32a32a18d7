//! Truncated Fourier series on the torus `T^{n0}` with complex coefficients.
//!
//! A series is a sparse map `k ∈ Z^{n0} → f̂(k)` with `|k| = Σ|k_i| ≤ kmax`.
//! The weighted majorant norm `‖f‖_r = Σ_k |f̂(k)| e^{|k| r}` upper-bounds the
//! sup of `|f|` on the complex strip `|Im φ| ≤ r` and is submultiplicative,
//! which is what every smallness estimate in the iteration is phrased in.
//!
//! Coefficient maps are `BTreeMap`s so that iteration order (and hence
//! floating-point summation order) is deterministic across runs.

use num_complex::Complex64;
use std::collections::BTreeMap;

/// `|k| = Σ|k_i|`.
pub fn k_order(k: &[i32]) -> usize {
    k.iter().map(|&ki| ki.unsigned_abs() as usize).sum()
}

/// `⟨k, ω⟩`.
pub fn k_dot(k: &[i32], omega: &[f64]) -> f64 {
    k.iter().zip(omega).map(|(&ki, &wi)| ki as f64 * wi).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub n0: usize,
    /// Hard truncation order: modes with `|k| > kmax` are dropped on insertion
    /// (the drop is reported by the operations that can cause it).
    pub kmax: usize,
    /// Default analyticity width for [`FourierSeries::norm`].
    pub r: f64,
    coeffs: BTreeMap<Vec<i32>, Complex64>,
}

impl FourierSeries {
    pub fn zero(n0: usize, kmax: usize, r: f64) -> Self {
        Self { n0, kmax, r, coeffs: BTreeMap::new() }
    }

    pub fn constant(n0: usize, kmax: usize, r: f64, c: Complex64) -> Self {
        let mut s = Self::zero(n0, kmax, r);
        s.set(vec![0; n0], c);
        s
    }

    pub fn harmonic(n0: usize, kmax: usize, r: f64, k: Vec<i32>, c: Complex64) -> Self {
        let mut s = Self::zero(n0, kmax, r);
        s.set(k, c);
        s
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    /// Inserts (or removes, for `c = 0`) a coefficient. Panics if the mode is
    /// outside the truncation order: callers that can legitimately overflow
    /// (products) go through [`FourierSeries::mul`], which drops and reports.
    pub fn set(&mut self, k: Vec<i32>, c: Complex64) {
        assert_eq!(k.len(), self.n0, "mode dimension mismatch");
        assert!(k_order(&k) <= self.kmax, "mode |k| exceeds kmax");
        if c == Complex64::ZERO {
            self.coeffs.remove(&k);
        } else {
            self.coeffs.insert(k, c);
        }
    }

    pub fn get(&self, k: &[i32]) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i32>, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn add_scaled(&mut self, other: &Self, factor: Complex64) {
        assert_eq!(self.n0, other.n0);
        for (k, c) in &other.coeffs {
            let v = self.get(k) + factor * c;
            if k_order(k) <= self.kmax {
                self.set(k.clone(), v);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, Complex64::ONE);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, -Complex64::ONE);
        out
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= factor;
        }
        if factor == Complex64::ZERO {
            out.coeffs.clear();
        }
        out
    }

    /// Convolution product. Modes beyond `kmax` are dropped; their weighted
    /// norm (at width `r`) is accumulated into `dropped`.
    pub fn mul(&self, other: &Self, r: f64, dropped: &mut f64) -> Self {
        assert_eq!(self.n0, other.n0);
        let kmax = self.kmax.max(other.kmax);
        let mut out = Self::zero(self.n0, kmax, self.r);
        for (ka, ca) in &self.coeffs {
            for (kb, cb) in &other.coeffs {
                let k: Vec<i32> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
                let c = ca * cb;
                if k_order(&k) <= kmax {
                    let v = out.get(&k) + c;
                    out.set(k, v);
                } else {
                    *dropped += c.norm() * (k_order(&k) as f64 * r).exp();
                }
            }
        }
        out
    }

    /// `(Γ_K f, (Id−Γ_K) f)`.
    pub fn truncate(&self, big_k: usize) -> (Self, Self) {
        let mut kept = Self::zero(self.n0, self.kmax, self.r);
        let mut tail = Self::zero(self.n0, self.kmax, self.r);
        for (k, c) in &self.coeffs {
            if k_order(k) <= big_k {
                kept.coeffs.insert(k.clone(), *c);
            } else {
                tail.coeffs.insert(k.clone(), *c);
            }
        }
        (kept, tail)
    }

    pub fn average(&self) -> Complex64 {
        self.get(&vec![0; self.n0])
    }

    /// `‖f‖_r = Σ_k |f̂(k)| e^{|k| r}`.
    pub fn norm_at(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, c)| c.norm() * (k_order(k) as f64 * r).exp())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_at(self.r)
    }

    pub fn eval(&self, phi: &[f64]) -> Complex64 {
        assert_eq!(phi.len(), self.n0);
        self.coeffs
            .iter()
            .map(|(k, c)| c * (Complex64::I * k_dot(k, phi)).exp())
            .sum()
    }

    /// `f(φ) ↦ conj(f(−φ̄))` at coefficient level: `k → −k`, coefficient
    /// conjugated. A series is real-valued on real angles iff it is a fixed
    /// point of this map.
    pub fn conj_reflect(&self) -> Self {
        let mut out = Self::zero(self.n0, self.kmax, self.r);
        for (k, c) in &self.coeffs {
            out.coeffs.insert(k.iter().map(|x| -x).collect(), c.conj());
        }
        out
    }

    /// Max deviation from `coeff(−k) = conj(coeff(k))`.
    pub fn symmetry_violation(&self) -> f64 {
        let refl = self.conj_reflect();
        let mut v: f64 = 0.0;
        for (k, c) in &self.coeffs {
            v = v.max((c - refl.get(k)).norm());
        }
        for (k, c) in &refl.coeffs {
            v = v.max((c - self.get(k)).norm());
        }
        v
    }

    /// Projects onto the conjugate-symmetric (real-valued) part.
    pub fn symmetrize(&mut self) {
        let refl = self.conj_reflect();
        let keys: std::collections::BTreeSet<Vec<i32>> = self
            .coeffs
            .keys()
            .chain(refl.coeffs.keys())
            .cloned()
            .collect();
        for k in keys {
            let c = (self.get(&k) + refl.get(&k)) * 0.5;
            self.set(k, c);
        }
    }

    /// `ω·∂_φ f`: coefficient-wise multiplication by `i⟨k,ω⟩`.
    pub fn dphi_along(&self, omega: &[f64]) -> Self {
        let mut out = Self::zero(self.n0, self.kmax, self.r);
        for (k, c) in &self.coeffs {
            let c2 = c * Complex64::new(0.0, k_dot(k, omega));
            if c2 != Complex64::ZERO {
                out.coeffs.insert(k.clone(), c2);
            }
        }
        out
    }

    /// Drops coefficients with `|c| < thr`; keeps supports from accumulating
    /// numerically-dead dust across composition steps.
    pub fn prune_below(&mut self, thr: f64) {
        self.coeffs.retain(|_, c| c.norm() >= thr);
    }
}
