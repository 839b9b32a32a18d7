//! Polynomial vector fields in `(w1, w2, w̄2)` with quasi-periodic
//! (Fourier-series) coefficients — the objects the KAM iteration acts on.
//!
//! A field component is a finite sum `Σ_l f_l(φ) w1^{l1} w2^{l2} w̄2^{l3}`
//! with each `f_l` a [`FourierSeries`]. The third variable `w̄2` is treated as
//! an independent coordinate `w3`; the *reality condition* ties components 2
//! and 3 (and the sign-reflected Fourier modes) together so that the triple
//! encodes a real 3D field.
//!
//! Monomials split into *lower-degree* indices (the finitely many the
//! iteration must remove: `l2+l3 = 0, l1 ≤ 3` and `l2+l3 = 1, l1 = 0`) and
//! *higher-degree* indices (`l1 ≥ 4`, or `|l| ≥ 2` with `l2+l3 ≥ 1`), which
//! are merely carried along with controlled norms.

use crate::fourier::FourierSeries;
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Exponents `(l1, l2, l3)` of `w1^{l1} w2^{l2} w̄2^{l3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonomialIndex {
    pub l1: u32,
    pub l2: u32,
    pub l3: u32,
}

impl MonomialIndex {
    pub fn new(l1: u32, l2: u32, l3: u32) -> Self {
        Self { l1, l2, l3 }
    }

    pub fn degree(&self) -> u32 {
        self.l1 + self.l2 + self.l3
    }

    /// `Σ_L^0`: `(l1,0,0)` with `l1 ≤ 3`, plus `(0,1,0)` and `(0,0,1)`.
    pub fn is_lower(&self) -> bool {
        (self.l2 + self.l3 == 0 && self.l1 <= 3) || (self.l2 + self.l3 == 1 && self.l1 == 0)
    }

    /// `Σ_H^0`: `l1 ≥ 4`, or `|l| ≥ 2` with `l2 + l3 ≥ 1`.
    pub fn is_higher(&self) -> bool {
        self.l1 >= 4 || (self.degree() >= 2 && self.l2 + self.l3 >= 1)
    }

    /// Reality partner: `l2 ↔ l3`.
    pub fn swapped(&self) -> Self {
        Self { l1: self.l1, l2: self.l3, l3: self.l2 }
    }
}

/// Scalar polynomial in `(w1, w2, w3)` with Fourier-series coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySeries {
    pub n0: usize,
    pub kmax: usize,
    pub r: f64,
    terms: BTreeMap<MonomialIndex, FourierSeries>,
}

impl PolySeries {
    pub fn zero(n0: usize, kmax: usize, r: f64) -> Self {
        Self { n0, kmax, r, terms: BTreeMap::new() }
    }

    pub fn constant(n0: usize, kmax: usize, r: f64, c: Complex64) -> Self {
        let mut p = Self::zero(n0, kmax, r);
        p.set_term(
            MonomialIndex::new(0, 0, 0),
            FourierSeries::constant(n0, kmax, r, c),
        );
        p
    }

    /// The coordinate `w_j`, `j ∈ {0,1,2}` for `(w1, w2, w3)`.
    pub fn var(n0: usize, kmax: usize, r: f64, j: usize) -> Self {
        let l = match j {
            0 => MonomialIndex::new(1, 0, 0),
            1 => MonomialIndex::new(0, 1, 0),
            2 => MonomialIndex::new(0, 0, 1),
            _ => panic!("variable index out of range"),
        };
        let mut p = Self::zero(n0, kmax, r);
        p.set_term(l, FourierSeries::constant(n0, kmax, r, Complex64::ONE));
        p
    }

    pub fn monomial(n0: usize, kmax: usize, r: f64, l: MonomialIndex, f: FourierSeries) -> Self {
        let mut p = Self::zero(n0, kmax, r);
        p.set_term(l, f);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn set_term(&mut self, l: MonomialIndex, f: FourierSeries) {
        if f.is_zero() {
            self.terms.remove(&l);
        } else {
            self.terms.insert(l, f);
        }
    }

    pub fn term(&self, l: &MonomialIndex) -> Option<&FourierSeries> {
        self.terms.get(l)
    }

    pub fn coeff(&self, l: &MonomialIndex) -> FourierSeries {
        self.terms
            .get(l)
            .cloned()
            .unwrap_or_else(|| FourierSeries::zero(self.n0, self.kmax, self.r))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MonomialIndex, &FourierSeries)> {
        self.terms.iter()
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(|l| l.degree()).max().unwrap_or(0)
    }

    pub fn add_scaled(&mut self, other: &Self, factor: Complex64) {
        if factor == Complex64::ZERO {
            return;
        }
        for (l, f) in &other.terms {
            let mut cur = self.coeff(l);
            cur.add_scaled(f, factor);
            self.set_term(*l, cur);
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
        let mut out = Self::zero(self.n0, self.kmax, self.r);
        if factor == Complex64::ZERO {
            return out;
        }
        for (l, f) in &self.terms {
            out.terms.insert(*l, f.scaled(factor));
        }
        out
    }

    /// Product truncated to total degree ≤ `deg_cutoff`; the weighted norm of
    /// dropped terms (degree or Fourier overflow) accumulates into `dropped`.
    pub fn mul(&self, other: &Self, deg_cutoff: u32, s: f64, dropped: &mut f64) -> Self {
        let mut out = Self::zero(self.n0, self.kmax.max(other.kmax), self.r);
        for (la, fa) in &self.terms {
            for (lb, fb) in &other.terms {
                let l = MonomialIndex::new(la.l1 + lb.l1, la.l2 + lb.l2, la.l3 + lb.l3);
                if l.degree() > deg_cutoff {
                    *dropped +=
                        fa.norm_at(self.r) * fb.norm_at(self.r) * s.powi(l.degree() as i32);
                    continue;
                }
                let mut prod_dropped = 0.0;
                let prod = fa.mul(fb, self.r, &mut prod_dropped);
                *dropped += prod_dropped * s.powi(l.degree() as i32);
                let mut cur = out.coeff(&l);
                cur.add_scaled(&prod, Complex64::ONE);
                out.set_term(l, cur);
            }
        }
        out
    }

    pub fn pow(&self, e: u32, deg_cutoff: u32, s: f64, dropped: &mut f64) -> Self {
        let mut out = Self::constant(self.n0, self.kmax, self.r, Complex64::ONE);
        for _ in 0..e {
            out = out.mul(self, deg_cutoff, s, dropped);
        }
        out
    }

    /// Substitutes `w_j := images[j]` (polynomial composition).
    pub fn substitute(
        &self,
        images: &[Self; 3],
        deg_cutoff: u32,
        s: f64,
        dropped: &mut f64,
    ) -> Self {
        // cache powers of each image up to the needed exponent
        let mut max_e = [0u32; 3];
        for l in self.terms.keys() {
            max_e[0] = max_e[0].max(l.l1);
            max_e[1] = max_e[1].max(l.l2);
            max_e[2] = max_e[2].max(l.l3);
        }
        let one = Self::constant(self.n0, self.kmax, self.r, Complex64::ONE);
        let mut pows: [Vec<Self>; 3] = [vec![one.clone()], vec![one.clone()], vec![one]];
        for j in 0..3 {
            for e in 1..=max_e[j] {
                let next = pows[j][(e - 1) as usize].mul(&images[j], deg_cutoff, s, dropped);
                pows[j].push(next);
            }
        }
        let mut out = Self::zero(self.n0, self.kmax, self.r);
        for (l, f) in &self.terms {
            let p12 = pows[0][l.l1 as usize].mul(&pows[1][l.l2 as usize], deg_cutoff, s, dropped);
            let p = p12.mul(&pows[2][l.l3 as usize], deg_cutoff, s, dropped);
            let coeff_poly = Self::monomial(self.n0, self.kmax, self.r, MonomialIndex::new(0, 0, 0), f.clone());
            let contrib = coeff_poly.mul(&p, deg_cutoff, s, dropped);
            out.add_scaled(&contrib, Complex64::ONE);
        }
        out
    }

    /// `∂/∂w_j`, `j ∈ {0,1,2}`.
    pub fn d_dw(&self, j: usize) -> Self {
        let mut out = Self::zero(self.n0, self.kmax, self.r);
        for (l, f) in &self.terms {
            let (e, l2) = match j {
                0 if l.l1 > 0 => (l.l1, MonomialIndex::new(l.l1 - 1, l.l2, l.l3)),
                1 if l.l2 > 0 => (l.l2, MonomialIndex::new(l.l1, l.l2 - 1, l.l3)),
                2 if l.l3 > 0 => (l.l3, MonomialIndex::new(l.l1, l.l2, l.l3 - 1)),
                0 | 1 | 2 => continue,
                _ => panic!("variable index out of range"),
            };
            let mut cur = out.coeff(&l2);
            cur.add_scaled(f, Complex64::new(e as f64, 0.0));
            out.set_term(l2, cur);
        }
        out
    }

    /// `ω·∂_φ` applied coefficient-wise.
    pub fn dphi_along(&self, omega: &[f64]) -> Self {
        let mut out = Self::zero(self.n0, self.kmax, self.r);
        for (l, f) in &self.terms {
            out.set_term(*l, f.dphi_along(omega));
        }
        out
    }

    /// `⦀·⦀_{r,s} = Σ_l ‖f_l‖_r s^{|l|}`.
    pub fn norm(&self, r: f64, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|(l, f)| f.norm_at(r) * s.powi(l.degree() as i32))
            .sum()
    }

    pub fn eval(&self, phi: &[f64], w: &[Complex64; 3]) -> Complex64 {
        self.terms
            .iter()
            .map(|(l, f)| {
                f.eval(phi)
                    * w[0].powu(l.l1)
                    * w[1].powu(l.l2)
                    * w[2].powu(l.l3)
            })
            .sum()
    }

    /// Keeps only monomials selected by `keep`.
    pub fn filter(&self, keep: impl Fn(&MonomialIndex) -> bool) -> Self {
        let mut out = Self::zero(self.n0, self.kmax, self.r);
        for (l, f) in &self.terms {
            if keep(l) {
                out.terms.insert(*l, f.clone());
            }
        }
        out
    }

    /// Γ_K applied to every coefficient; returns `(kept, tail)`.
    pub fn truncate_fourier(&self, big_k: usize) -> (Self, Self) {
        let mut kept = Self::zero(self.n0, self.kmax, self.r);
        let mut tail = Self::zero(self.n0, self.kmax, self.r);
        for (l, f) in &self.terms {
            let (a, b) = f.truncate(big_k);
            kept.set_term(*l, a);
            tail.set_term(*l, b);
        }
        (kept, tail)
    }

    pub fn prune_below(&mut self, thr: f64) {
        let keys: Vec<MonomialIndex> = self.terms.keys().copied().collect();
        for l in keys {
            let mut f = self.terms.remove(&l).unwrap();
            f.prune_below(thr);
            if !f.is_zero() {
                self.terms.insert(l, f);
            }
        }
    }

    /// Reality partner of a scalar coefficient block: `l2 ↔ l3`, `k → −k`,
    /// conjugate. Component 1 must be a fixed point of this; components 2/3
    /// must map to each other.
    pub fn reality_partner(&self) -> Self {
        let mut out = Self::zero(self.n0, self.kmax, self.r);
        for (l, f) in &self.terms {
            out.set_term(l.swapped(), f.conj_reflect());
        }
        out
    }

    /// `max_l ‖difference of coefficients‖_∞` against another poly-series.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let mut v: f64 = 0.0;
        let keys: Vec<MonomialIndex> = self
            .terms
            .keys()
            .chain(other.terms.keys())
            .copied()
            .collect();
        for l in keys {
            let a = self.coeff(&l);
            let b = other.coeff(&l);
            v = v.max(a.sub(&b).norm_at(0.0));
        }
        v
    }
}

/// Three-component vector field at a single parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct QPPolyField {
    pub n0: usize,
    pub kmax: usize,
    /// Total-degree cutoff `D`.
    pub d: u32,
    pub r: f64,
    pub s: f64,
    pub comps: [PolySeries; 3],
}

impl QPPolyField {
    pub fn zero(n0: usize, kmax: usize, d: u32, r: f64, s: f64) -> Self {
        Self {
            n0,
            kmax,
            d,
            r,
            s,
            comps: [
                PolySeries::zero(n0, kmax, r),
                PolySeries::zero(n0, kmax, r),
                PolySeries::zero(n0, kmax, r),
            ],
        }
    }

    pub fn add_scaled(&mut self, other: &Self, factor: Complex64) {
        for j in 0..3 {
            self.comps[j].add_scaled(&other.comps[j], factor);
        }
    }

    /// `max_j Σ_l ‖F_{j,l}‖_r s^{|l|}`.
    pub fn norm(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.norm(self.r, self.s))
            .fold(0.0, f64::max)
    }

    pub fn norm_at(&self, r: f64, s: f64) -> f64 {
        self.comps.iter().map(|c| c.norm(r, s)).fold(0.0, f64::max)
    }

    pub fn eval(&self, phi: &[f64], w: &[Complex64; 3]) -> [Complex64; 3] {
        [
            self.comps[0].eval(phi, w),
            self.comps[1].eval(phi, w),
            self.comps[2].eval(phi, w),
        ]
    }

    /// Partition into (lower-degree, higher-degree) parts. Monomials that are
    /// neither (the index family excluded by construction) would be a bug in
    /// upstream degree bookkeeping; they are filed with the higher part so the
    /// two parts always re-add to the input exactly.
    pub fn split_lower_higher(&self) -> (Self, Self) {
        let mut lower = Self::zero(self.n0, self.kmax, self.d, self.r, self.s);
        let mut higher = Self::zero(self.n0, self.kmax, self.d, self.r, self.s);
        for j in 0..3 {
            lower.comps[j] = self.comps[j].filter(|l| l.is_lower());
            higher.comps[j] = self.comps[j].filter(|l| !l.is_lower());
        }
        (lower, higher)
    }

    /// Max deviation from the reality condition:
    /// `H1(k, (l1,l2,l3)) = conj H1(−k, (l1,l3,l2))` and `H2 ↔ H3` likewise.
    pub fn reality_violation(&self) -> f64 {
        let v1 = self.comps[0].max_coeff_diff(&self.comps[0].reality_partner());
        let v23 = self.comps[1].max_coeff_diff(&self.comps[2].reality_partner());
        v1.max(v23)
    }

    /// Projects onto the reality-satisfying part (component 1 symmetrized,
    /// component 3 replaced by the partner of the symmetrized 2/3 mean).
    pub fn enforce_reality(&mut self) {
        let p1 = self.comps[0].reality_partner();
        let mut c1 = self.comps[0].clone();
        c1.add_scaled(&p1, Complex64::ONE);
        self.comps[0] = c1.scaled(Complex64::new(0.5, 0.0));

        let p23 = self.comps[2].reality_partner();
        let mut c2 = self.comps[1].clone();
        c2.add_scaled(&p23, Complex64::ONE);
        let c2 = c2.scaled(Complex64::new(0.5, 0.0));
        self.comps[2] = c2.reality_partner();
        self.comps[1] = c2;
    }

    pub fn prune_below(&mut self, thr: f64) {
        for c in &mut self.comps {
            c.prune_below(thr);
        }
    }

    /// The rescaling `w1 → ε0 w1`, `w2, w̄2 → ε0² w2, ε0² w̄2` with the matching
    /// time normalization: component 1 is divided by `ε0`, components 2 and 3
    /// by `ε0²`. Each monomial coefficient picks up
    /// `ε0^{l1 + 2(l2+l3) − p_j}` with `p = (1, 2, 2)`.
    pub fn rescale(&self, eps: f64) -> crate::Result<Self> {
        if eps <= 0.0 {
            return Err(crate::Error::InvalidInput(format!(
                "rescale requires ε > 0, got {eps}"
            )));
        }
        let eps0 = eps.powf(0.25);
        let mut out = self.clone();
        for (j, p) in [(0usize, 1i32), (1, 2), (2, 2)] {
            let mut comp = PolySeries::zero(self.n0, self.kmax, self.r);
            for (l, f) in self.comps[j].iter() {
                let w = l.l1 as i32 + 2 * (l.l2 + l.l3) as i32 - p;
                comp.set_term(*l, f.scaled(Complex64::new(eps0.powi(w), 0.0)));
            }
            out.comps[j] = comp;
        }
        Ok(out)
    }
}

/// Near-identity change of variables `w = w+ + W0 + W(φ, w+)`.
#[derive(Debug, Clone)]
pub struct PointTransform {
    pub w0: [Complex64; 3],
    pub w: [PolySeries; 3],
}

impl PointTransform {
    pub fn identity(n0: usize, kmax: usize, r: f64) -> Self {
        Self {
            w0: [Complex64::ZERO; 3],
            w: [
                PolySeries::zero(n0, kmax, r),
                PolySeries::zero(n0, kmax, r),
                PolySeries::zero(n0, kmax, r),
            ],
        }
    }

    /// The three coordinate images `w_j(φ, w+)` as poly-series.
    pub fn images(&self, n0: usize, kmax: usize, r: f64) -> [PolySeries; 3] {
        let mut out: [PolySeries; 3] = core::array::from_fn(|j| {
            let mut p = PolySeries::var(n0, kmax, r, j);
            p.add_scaled(&PolySeries::constant(n0, kmax, r, self.w0[j]), Complex64::ONE);
            p
        });
        for j in 0..3 {
            out[j].add_scaled(&self.w[j], Complex64::ONE);
        }
        out
    }

    pub fn eval(&self, phi: &[f64], wplus: &[Complex64; 3]) -> [Complex64; 3] {
        [
            wplus[0] + self.w0[0] + self.w[0].eval(phi, wplus),
            wplus[1] + self.w0[1] + self.w[1].eval(phi, wplus),
            wplus[2] + self.w0[2] + self.w[2].eval(phi, wplus),
        ]
    }

    pub fn norm(&self, r: f64, s: f64) -> f64 {
        (0..3)
            .map(|j| self.w0[j].norm() + self.w[j].norm(r, s))
            .fold(0.0, f64::max)
    }

    pub fn reality_violation(&self) -> f64 {
        let v1 = self.w[0].max_coeff_diff(&self.w[0].reality_partner());
        let v23 = self.w[1].max_coeff_diff(&self.w[2].reality_partner());
        let v0 = (self.w0[0] - self.w0[0].conj())
            .norm()
            .max((self.w0[1] - self.w0[2].conj()).norm());
        v1.max(v23).max(v0)
    }
}

/// `F ∘ T` as a field of `w+`: substitutes the transform images into every
/// component. Returns the composed field and the weighted norm of everything
/// dropped by degree/Fourier truncation.
pub fn compose(field: &QPPolyField, t: &PointTransform) -> (QPPolyField, f64) {
    let images = t.images(field.n0, field.kmax, field.r);
    let mut dropped = 0.0;
    let mut out = QPPolyField::zero(field.n0, field.kmax, field.d, field.r, field.s);
    for j in 0..3 {
        out.comps[j] = field.comps[j].substitute(&images, field.d, field.s, &mut dropped);
    }
    (out, dropped)
}

/// Complexification `w1 = v1, w2 = v2 + i v3, w̄2 = v2 − i v3` applied to a
/// real 3-component field given in `(v1, v2, v3)` variables: returns
/// `(X1, X2 + iX3, X2 − iX3)` each rewritten in the `w` variables, which
/// satisfies the reality condition by construction.
pub fn complexify_field(real_field: &QPPolyField) -> QPPolyField {
    let (n0, kmax, r) = (real_field.n0, real_field.kmax, real_field.r);
    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, -0.5); // 1/(2i)
    // v1 = w1, v2 = (w2 + w3)/2, v3 = (w2 − w3)/(2i)
    let v1 = PolySeries::var(n0, kmax, r, 0);
    let mut v2 = PolySeries::var(n0, kmax, r, 1).scaled(half);
    v2.add_scaled(&PolySeries::var(n0, kmax, r, 2), half);
    let mut v3 = PolySeries::var(n0, kmax, r, 1).scaled(half_i);
    v3.add_scaled(&PolySeries::var(n0, kmax, r, 2), -half_i);
    let images = [v1, v2, v3];

    let mut dropped = 0.0;
    // the substitution is degree-preserving, so the cutoff never binds
    let d = real_field.d.max(real_field.comps.iter().map(|c| c.max_degree()).max().unwrap_or(0));
    let x1 = real_field.comps[0].substitute(&images, d, real_field.s, &mut dropped);
    let x2 = real_field.comps[1].substitute(&images, d, real_field.s, &mut dropped);
    let x3 = real_field.comps[2].substitute(&images, d, real_field.s, &mut dropped);
    assert_eq!(dropped, 0.0);

    let mut h2 = x2.clone();
    h2.add_scaled(&x3, Complex64::I);
    let mut h3 = x2;
    h3.add_scaled(&x3, -Complex64::I);

    let mut out = real_field.clone();
    out.comps = [x1, h2, h3];
    out
}
