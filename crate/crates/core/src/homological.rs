//! The chain of small-divisor homological equations that determines the
//! quasi-periodic part `U` of one iteration step, together with the drift
//! normal form (the φ-averages that cannot be removed and instead deform the
//! frequencies).
//!
//! Working in actual field units (all ε0 powers folded into the stored
//! coefficients), the linearized conjugation equation per component and
//! monomial reads `ω∂_φ U + λU + couplings = Γ_K G − drift` with
//!
//! * component 1, `(l1,0,0)`: `λ = (l1−1)ε0²e1`, couplings
//!   `(l1−3)ε0²e2·U_{1,(l1−1)00} + (l1−5)ε0²Ω1·U_{1,(l1−2)00}`, the average
//!   removed for every `l1` (the four drift entries);
//! * component 1, `(0,l2,l3)`: `λ = l2μ2 + l3μ3 − ε0²e1`;
//! * components 2/3, `(l1,0,0)`: `λ = l1ε0²e1 − μ_j`, couplings
//!   `(l1−1)ε0²e2·U_{j,(l1−1)00} + (l1−2)ε0²Ω1·U_{j,(l1−2)00}`;
//! * `U_{2,010}`, `U_{3,001}`: `λ = 0` with the average removed (the
//!   conjugate drift pair); `U_{2,001}`, `U_{3,010}`: `λ = ±(μ3 − μ2)`.
//!
//! Here `μ2, μ3` are the full complex multipliers of `w2, w̄2` in the normal
//! part (`μ2 = iΩ2` before any drift has accumulated). Because the averages
//! are removed at every `l1` of the component-1 ladder, all solved `U_{1,·}`
//! are zero-mean, so the coupling terms fed forward along the ladder are
//! zero-mean too and the `λ = 0` equations stay solvable.
//!
//! Every equation is diagonal in Fourier space and solved coefficient-wise in
//! closed form.

use crate::field::{MonomialIndex, PolySeries, QPPolyField};
use crate::fourier::{k_dot, k_order, FourierSeries};
use crate::{Error, Result};
use num_complex::Complex64;

/// Normal-form data at one parameter value: `N1 = ε0²(Ω1w1³ + e2w1² + e1w1)`,
/// `N2 = μ2 w2`, `N3 = μ3 w̄2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormPoint {
    pub omega1: f64,
    pub mu2: Complex64,
    pub mu3: Complex64,
    pub e1: f64,
    pub e2: f64,
}

impl NormalFormPoint {
    /// Unperturbed start: `μ2 = iΩ2` with real `Ω2`, no translation yet.
    pub fn initial(omega1: f64, omega2: f64) -> Self {
        Self {
            omega1,
            mu2: Complex64::new(0.0, omega2),
            mu3: Complex64::new(0.0, -omega2),
            e1: 0.0,
            e2: 0.0,
        }
    }

    /// The quantity entering the Melnikov divisors `⟨k,ω⟩ + c·Im Ω2`.
    pub fn im_omega2(&self) -> f64 {
        self.mu2.im
    }

    /// `max(|μ2 − conj μ3|, |Im e1|, |Im e2|)`-style conjugacy defect is zero
    /// by construction here since e1, e2 are stored real; this checks μ only.
    pub fn conjugacy_violation(&self) -> f64 {
        (self.mu2 - self.mu3.conj()).norm()
    }

    /// The normal part as a field (actual units).
    pub fn field(&self, n0: usize, kmax: usize, d: u32, r: f64, s: f64, eps0: f64) -> QPPolyField {
        let mut n = QPPolyField::zero(n0, kmax, d, r, s);
        let e2sq = eps0 * eps0;
        let put = |p: &mut PolySeries, l: MonomialIndex, c: Complex64| {
            if c != Complex64::ZERO {
                p.set_term(l, FourierSeries::constant(n0, kmax, r, c));
            }
        };
        put(&mut n.comps[0], MonomialIndex::new(3, 0, 0), Complex64::new(e2sq * self.omega1, 0.0));
        put(&mut n.comps[0], MonomialIndex::new(2, 0, 0), Complex64::new(e2sq * self.e2, 0.0));
        put(&mut n.comps[0], MonomialIndex::new(1, 0, 0), Complex64::new(e2sq * self.e1, 0.0));
        put(&mut n.comps[1], MonomialIndex::new(0, 1, 0), self.mu2);
        put(&mut n.comps[2], MonomialIndex::new(0, 0, 1), self.mu3);
        n
    }
}

/// The φ-averages removed from the lower-degree terms: the four entries of
/// the `w1`-ladder plus the conjugate pair on the rotation components.
#[derive(Debug, Clone, Copy, Default)]
pub struct DriftNormal {
    /// `Ĝ_{1,l100}(0)` for `l1 = 0..3` (actual units).
    pub g1: [Complex64; 4],
    pub g2_010: Complex64,
    pub g3_001: Complex64,
}

impl DriftNormal {
    /// Reality demands the four ladder entries real and the rotation pair
    /// conjugate; returns the worst defect.
    pub fn reality_violation(&self) -> f64 {
        let v1 = self.g1.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        v1.max((self.g2_010 - self.g3_001.conj()).norm())
    }

    /// The drift as a field `N̂` (actual units).
    pub fn field(&self, n0: usize, kmax: usize, d: u32, r: f64, s: f64) -> QPPolyField {
        let mut n = QPPolyField::zero(n0, kmax, d, r, s);
        for (l1, c) in self.g1.iter().enumerate() {
            if *c != Complex64::ZERO {
                n.comps[0].set_term(
                    MonomialIndex::new(l1 as u32, 0, 0),
                    FourierSeries::constant(n0, kmax, r, *c),
                );
            }
        }
        if self.g2_010 != Complex64::ZERO {
            n.comps[1].set_term(
                MonomialIndex::new(0, 1, 0),
                FourierSeries::constant(n0, kmax, r, self.g2_010),
            );
        }
        if self.g3_001 != Complex64::ZERO {
            n.comps[2].set_term(
                MonomialIndex::new(0, 0, 1),
                FourierSeries::constant(n0, kmax, r, self.g3_001),
            );
        }
        n
    }
}

/// One homological solve chain instance at a single parameter value.
#[derive(Debug, Clone)]
pub struct HomologicalProblem<'a> {
    pub omega: &'a [f64],
    /// Γ_K order applied to the RHS before solving.
    pub kcut: usize,
    pub nf: NormalFormPoint,
    pub eps0: f64,
    /// Lower-degree part of the field minus the normal part (actual units).
    pub g_lower: &'a QPPolyField,
}

/// Per-equation ledger entry.
#[derive(Debug, Clone)]
pub struct EquationRow {
    pub comp: usize,
    pub l: MonomialIndex,
    pub max_inv_divisor: f64,
    pub drift: Option<Complex64>,
}

#[derive(Debug, Clone)]
pub struct ChainSolution {
    pub u: [PolySeries; 3],
    pub drift: DriftNormal,
    pub ledger: Vec<EquationRow>,
}

/// Catastrophic-underflow guard on divisors; certified parameter sets keep
/// divisors far above this.
const DIVISOR_FLOOR: f64 = 1e-250;

/// Solves `ω∂_φ u + λ u = rhs` coefficient-wise:
/// `û(k) = r̂hs(k)/(i⟨k,ω⟩ + λ)`. With `subtract_average` set, the `k = 0`
/// mode of the RHS is removed first (returned as the drift) and `û(0) = 0`.
/// Also reports `max_k 1/|divisor|`.
pub fn solve_scalar(
    omega: &[f64],
    lambda: Complex64,
    rhs: &FourierSeries,
    subtract_average: bool,
) -> Result<(FourierSeries, Complex64, f64)> {
    let mut u = FourierSeries::zero(rhs.n0, rhs.kmax, rhs.r);
    let mut drift = Complex64::ZERO;
    let mut max_inv = 0.0f64;
    for (k, c) in rhs.iter() {
        if subtract_average && k_order(k) == 0 {
            drift = *c;
            continue;
        }
        let div = Complex64::new(0.0, k_dot(k, omega)) + lambda;
        if div.norm() < DIVISOR_FLOOR {
            return Err(Error::ResonanceViolation {
                k: k.clone(),
                divisor: div.norm(),
                floor: DIVISOR_FLOOR,
            });
        }
        max_inv = max_inv.max(1.0 / div.norm());
        u.set(k.clone(), c / div);
    }
    Ok((u, drift, max_inv))
}

/// Same equation differentiated in the parameter: given the solved `u` and
/// the `a`-derivatives of `ω`, `λ`, and the RHS, returns `∂_a u` from
/// `∂_a û(k) = (∂_a r̂hs(k) − (i⟨k,∂_aω⟩ + ∂_aλ)·û(k)) / (i⟨k,ω⟩ + λ)`.
/// Solving the differentiated equation on the same divisors avoids the
/// divisor-sensitivity amplification of differencing `u` across grid points.
pub fn solve_scalar_da(
    omega: &[f64],
    domega: &[f64],
    lambda: Complex64,
    dlambda: Complex64,
    rhs_da: &FourierSeries,
    u: &FourierSeries,
    subtract_average: bool,
) -> Result<FourierSeries> {
    let mut keys: std::collections::BTreeSet<Vec<i32>> = rhs_da.iter().map(|(k, _)| k.clone()).collect();
    keys.extend(u.iter().map(|(k, _)| k.clone()));
    let mut du = FourierSeries::zero(u.n0, u.kmax, u.r);
    for k in keys {
        if subtract_average && k_order(&k) == 0 {
            continue;
        }
        let div = Complex64::new(0.0, k_dot(&k, omega)) + lambda;
        if div.norm() < DIVISOR_FLOOR {
            return Err(Error::ResonanceViolation {
                k: k.clone(),
                divisor: div.norm(),
                floor: DIVISOR_FLOOR,
            });
        }
        let ddiv = Complex64::new(0.0, k_dot(&k, domega)) + dlambda;
        du.set(k.clone(), (rhs_da.get(&k) - ddiv * u.get(&k)) / div);
    }
    Ok(du)
}

fn lower_ladder(comp: &PolySeries, l1: u32) -> FourierSeries {
    comp.coeff(&MonomialIndex::new(l1, 0, 0))
}

/// Solves the full chain in dependency order (`l1 = 0,1,2,3` along the
/// component-1 ladder, then the rotation monomials), removing averages
/// exactly where the drift normal form lives.
pub fn solve_chain(p: &HomologicalProblem) -> Result<ChainSolution> {
    let nf = &p.nf;
    let e0sq = p.eps0 * p.eps0;
    let (n0, kmax, r) = (p.g_lower.n0, p.g_lower.kmax, p.g_lower.r);
    let mut u = [
        PolySeries::zero(n0, kmax, r),
        PolySeries::zero(n0, kmax, r),
        PolySeries::zero(n0, kmax, r),
    ];
    let mut ledger = Vec::new();
    let mut drift = DriftNormal::default();

    let truncated = |comp: usize, l: MonomialIndex| -> FourierSeries {
        p.g_lower.comps[comp].coeff(&l).truncate(p.kcut).0
    };

    // component 1 ladder, averages removed at every rung
    for l1 in 0..=3u32 {
        let l = MonomialIndex::new(l1, 0, 0);
        let mut rhs = truncated(0, l);
        if l1 >= 1 {
            let c = (l1 as f64 - 3.0) * e0sq * nf.e2;
            rhs.add_scaled(&lower_ladder(&u[0], l1 - 1), Complex64::new(-c, 0.0));
        }
        if l1 >= 2 {
            let c = (l1 as f64 - 5.0) * e0sq * nf.omega1;
            rhs.add_scaled(&lower_ladder(&u[0], l1 - 2), Complex64::new(-c, 0.0));
        }
        let lambda = Complex64::new((l1 as f64 - 1.0) * e0sq * nf.e1, 0.0);
        let (sol, d, max_inv) = solve_scalar(p.omega, lambda, &rhs, true)
            .map_err(|e| chain_err(e, 0, l))?;
        drift.g1[l1 as usize] = d;
        u[0].set_term(l, sol);
        ledger.push(EquationRow { comp: 0, l, max_inv_divisor: max_inv, drift: Some(d) });
    }

    // component 1 rotation monomials
    for (l2, l3) in [(1u32, 0u32), (0, 1)] {
        let l = MonomialIndex::new(0, l2, l3);
        let rhs = truncated(0, l);
        let lambda = nf.mu2 * l2 as f64 + nf.mu3 * l3 as f64 - Complex64::new(e0sq * nf.e1, 0.0);
        let (sol, _, max_inv) =
            solve_scalar(p.omega, lambda, &rhs, false).map_err(|e| chain_err(e, 0, l))?;
        u[0].set_term(l, sol);
        ledger.push(EquationRow { comp: 0, l, max_inv_divisor: max_inv, drift: None });
    }

    // components 2 and 3 ladders
    for j in 1..=2usize {
        let mu_j = if j == 1 { nf.mu2 } else { nf.mu3 };
        for l1 in 0..=3u32 {
            let l = MonomialIndex::new(l1, 0, 0);
            let mut rhs = truncated(j, l);
            if l1 >= 1 {
                let c = (l1 as f64 - 1.0) * e0sq * nf.e2;
                rhs.add_scaled(&lower_ladder(&u[j], l1 - 1), Complex64::new(-c, 0.0));
            }
            if l1 >= 2 {
                let c = (l1 as f64 - 2.0) * e0sq * nf.omega1;
                rhs.add_scaled(&lower_ladder(&u[j], l1 - 2), Complex64::new(-c, 0.0));
            }
            let lambda = Complex64::new(l1 as f64 * e0sq * nf.e1, 0.0) - mu_j;
            let (sol, _, max_inv) =
                solve_scalar(p.omega, lambda, &rhs, false).map_err(|e| chain_err(e, j, l))?;
            u[j].set_term(l, sol);
            ledger.push(EquationRow { comp: j, l, max_inv_divisor: max_inv, drift: None });
        }
    }

    // rotation monomials of components 2/3: the diagonal pair carries drift,
    // the off-diagonal pair sees the divisor μ3 − μ2
    {
        let l = MonomialIndex::new(0, 1, 0);
        let rhs = truncated(1, l);
        let (sol, d, max_inv) =
            solve_scalar(p.omega, Complex64::ZERO, &rhs, true).map_err(|e| chain_err(e, 1, l))?;
        drift.g2_010 = d;
        u[1].set_term(l, sol);
        ledger.push(EquationRow { comp: 1, l, max_inv_divisor: max_inv, drift: Some(d) });

        let l = MonomialIndex::new(0, 0, 1);
        let rhs = truncated(1, l);
        let (sol, _, max_inv) = solve_scalar(p.omega, nf.mu3 - nf.mu2, &rhs, false)
            .map_err(|e| chain_err(e, 1, l))?;
        u[1].set_term(l, sol);
        ledger.push(EquationRow { comp: 1, l, max_inv_divisor: max_inv, drift: None });

        let l = MonomialIndex::new(0, 0, 1);
        let rhs = truncated(2, l);
        let (sol, d, max_inv) =
            solve_scalar(p.omega, Complex64::ZERO, &rhs, true).map_err(|e| chain_err(e, 2, l))?;
        drift.g3_001 = d;
        u[2].set_term(l, sol);
        ledger.push(EquationRow { comp: 2, l, max_inv_divisor: max_inv, drift: Some(d) });

        let l = MonomialIndex::new(0, 1, 0);
        let rhs = truncated(2, l);
        let (sol, _, max_inv) = solve_scalar(p.omega, nf.mu2 - nf.mu3, &rhs, false)
            .map_err(|e| chain_err(e, 2, l))?;
        u[2].set_term(l, sol);
        ledger.push(EquationRow { comp: 2, l, max_inv_divisor: max_inv, drift: None });
    }

    Ok(ChainSolution { u, drift, ledger })
}

fn chain_err(e: Error, comp: usize, l: MonomialIndex) -> Error {
    match e {
        Error::ResonanceViolation { k, divisor, floor } => Error::StepFailure {
            step: 0,
            detail: format!(
                "homological equation (component {}, l = ({},{},{})) hit divisor {divisor:.3e} < {floor:.3e} at k = {k:?}",
                comp + 1,
                l.l1,
                l.l2,
                l.l3
            ),
        },
        other => other,
    }
}

/// Independent re-substitution residual of the conjugation equation: computes
/// `lower(DN·U + Γ_K G − ω∂_φ U − DU·N − N̂)` with generic field algebra (no
/// per-monomial formulas) and returns its weighted norm. The higher-degree
/// leftovers of the substitution are exactly the remainder `R2` and are not
/// counted.
pub fn conjugation_residual(
    sol: &ChainSolution,
    p: &HomologicalProblem,
    s: f64,
) -> f64 {
    let (n0, kmax, r) = (p.g_lower.n0, p.g_lower.kmax, p.g_lower.r);
    let d = p.g_lower.d;
    let nfield = p.nf.field(n0, kmax, d, r, s, p.eps0);
    let mut dropped = 0.0;
    // big enough cutoff that nothing lower-degree is lost
    let dcut = 12u32;

    let mut res = QPPolyField::zero(n0, kmax, d, r, s);
    for i in 0..3 {
        // DN_i·U = Σ_j ∂N_i/∂w_j · U_j
        let mut acc = PolySeries::zero(n0, kmax, r);
        for j in 0..3 {
            let dn = nfield.comps[i].d_dw(j);
            acc.add_scaled(&dn.mul(&sol.u[j], dcut, s, &mut dropped), Complex64::ONE);
        }
        // − DU_i·N
        for j in 0..3 {
            let du = sol.u[i].d_dw(j);
            acc.add_scaled(&du.mul(&nfield.comps[j], dcut, s, &mut dropped), -Complex64::ONE);
        }
        // + Γ_K G − ω∂_φ U
        acc.add_scaled(&p.g_lower.comps[i].truncate_fourier(p.kcut).0, Complex64::ONE);
        acc.add_scaled(&sol.u[i].dphi_along(p.omega), -Complex64::ONE);
        res.comps[i] = acc.filter(|l| l.is_lower());
    }
    let nhat = sol.drift.field(n0, kmax, d, r, s);
    res.add_scaled(&nhat, -Complex64::ONE);
    res.norm_at(r, s)
}

/// The printed one-step remainder: `R1 + R2` (higher-degree terms produced by
/// the cubic normal part acting on `U`), the degree-truncated
/// `∫ DG(φ, u + ξU)·U dξ` term, and the truncation tail `(Id−Γ_K)G`.
/// Diagnostic: the iteration itself recovers these implicitly by direct
/// composition, but their size drives the step-size analysis.
pub fn build_remainders(
    sol: &ChainSolution,
    p: &HomologicalProblem,
    f_higher: &QPPolyField,
    s: f64,
) -> QPPolyField {
    let (n0, kmax, r) = (p.g_lower.n0, p.g_lower.kmax, p.g_lower.r);
    let d = p.g_lower.d;
    let nf = &p.nf;
    let e0sq = p.eps0 * p.eps0;
    let mut dropped = 0.0;
    let dcut = d.max(f_higher.d);
    let w1 = PolySeries::var(n0, kmax, r, 0);
    let cst = |x: Complex64| PolySeries::constant(n0, kmax, r, x);

    let mut out = QPPolyField::zero(n0, kmax, dcut, r, s);

    // R1 = col((3Ω1 u1 + e2)U1² + Ω1 U1³, 0, 0), carried at the ε0² weight of
    // the slow component
    {
        let u1sq = sol.u[0].mul(&sol.u[0], dcut, s, &mut dropped);
        let u1cu = u1sq.mul(&sol.u[0], dcut, s, &mut dropped);
        let mut lin = w1.scaled(Complex64::new(3.0 * nf.omega1, 0.0));
        lin.add_scaled(&cst(Complex64::new(nf.e2, 0.0)), Complex64::ONE);
        let mut r1 = lin.mul(&u1sq, dcut, s, &mut dropped);
        r1.add_scaled(&u1cu, Complex64::new(nf.omega1, 0.0));
        out.comps[0].add_scaled(&r1, Complex64::new(e0sq, 0.0));
    }

    // R2 = col(R21, ε0² R22, ε0² R23), exactly as printed
    {
        let idx = |l1: u32, l2: u32, l3: u32| MonomialIndex::new(l1, l2, l3);
        let u1_200 = sol.u[0].coeff(&idx(2, 0, 0));
        let u1_300 = sol.u[0].coeff(&idx(3, 0, 0));
        let w1p4 = w1.pow(4, dcut, s, &mut dropped);
        // R21 = (Ω2 U_{1,200} − e2 U_{1,300}) u1⁴
        //       + Σ_{l2+l3=1} (2e2 + 3Ω1 u1) U_{1,0l2l3} u1 u2^{l2} ū2^{l3}
        let mut coeff = u1_200.scaled(nf.mu2);
        coeff.add_scaled(&u1_300, Complex64::new(-nf.e2, 0.0));
        let mut r21 = PolySeries::monomial(n0, kmax, r, idx(0, 0, 0), coeff)
            .mul(&w1p4, dcut, s, &mut dropped);
        let mut lin = w1.scaled(Complex64::new(3.0 * nf.omega1, 0.0));
        lin.add_scaled(&cst(Complex64::new(2.0 * nf.e2, 0.0)), Complex64::ONE);
        for (l2, l3) in [(1u32, 0u32), (0, 1)] {
            let u_block = sol.u[0].coeff(&idx(0, l2, l3));
            let mono = PolySeries::monomial(n0, kmax, r, idx(1, l2, l3), u_block);
            r21.add_scaled(&lin.mul(&mono, dcut, s, &mut dropped), Complex64::ONE);
        }
        out.comps[0].add_scaled(&r21, Complex64::ONE);

        // R2j = −[2Ω1 U_{j,200} + 3(Ω1 u1 + e2) U_{j,300}] u1⁴, j = 2, 3
        for j in 1..=2usize {
            let uj_200 = sol.u[j].coeff(&idx(2, 0, 0));
            let uj_300 = sol.u[j].coeff(&idx(3, 0, 0));
            let mut block =
                PolySeries::monomial(n0, kmax, r, idx(0, 0, 0), uj_200.scaled(Complex64::new(2.0 * nf.omega1, 0.0)));
            let mut aff = w1.scaled(Complex64::new(nf.omega1, 0.0));
            aff.add_scaled(&cst(Complex64::new(nf.e2, 0.0)), Complex64::ONE);
            let m300 = PolySeries::monomial(n0, kmax, r, idx(0, 0, 0), uj_300);
            block.add_scaled(
                &aff.mul(&m300, dcut, s, &mut dropped),
                Complex64::new(3.0, 0.0),
            );
            let r2j = block.mul(&w1p4, dcut, s, &mut dropped);
            out.comps[j].add_scaled(&r2j, Complex64::new(-e0sq, 0.0));
        }
    }

    // ∫₀¹ DG(φ, u + ξU)·U dξ — G is polynomial of low degree, so the integral
    // is evaluated exactly by Gauss–Legendre with 4 nodes in ξ
    {
        let nodes = [
            (0.069431844202973714, 0.17392742256872693),
            (0.33000947820757187, 0.32607257743127305),
            (0.66999052179242813, 0.32607257743127305),
            (0.93056815579702623, 0.17392742256872693),
        ];
        let mut total = [
            PolySeries::zero(n0, kmax, r),
            PolySeries::zero(n0, kmax, r),
            PolySeries::zero(n0, kmax, r),
        ];
        for (xi, wgt) in nodes {
            // images u + ξU
            let images: [PolySeries; 3] = core::array::from_fn(|j| {
                let mut p2 = PolySeries::var(n0, kmax, r, j);
                p2.add_scaled(&sol.u[j], Complex64::new(xi, 0.0));
                p2
            });
            for i in 0..3 {
                for j in 0..3 {
                    let dg = p.g_lower.comps[i]
                        .d_dw(j)
                        .substitute(&images, dcut, s, &mut dropped);
                    let term = dg.mul(&sol.u[j], dcut, s, &mut dropped);
                    total[i].add_scaled(&term, Complex64::new(wgt, 0.0));
                }
            }
        }
        for i in 0..3 {
            out.comps[i].add_scaled(&total[i], Complex64::ONE);
        }
    }

    // truncation tail (Id − Γ_K)G
    for i in 0..3 {
        let (_, tail) = p.g_lower.comps[i].truncate_fourier(p.kcut);
        out.comps[i].add_scaled(&tail, Complex64::ONE);
    }
    out
}
