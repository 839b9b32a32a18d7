//! The iteration driver: composes the per-step ingredients — Melnikov
//! parameter exclusion, the homological solve chain, the translation of the
//! degenerate direction, and the change of variables — into the full
//! quadratically convergent scheme, and folds the resulting transform chain
//! into the torus embedding.
//!
//! # Conventions
//!
//! All fields are kept in *actual rescaled units*: every ε0 power is folded
//! into the stored coefficients (see [`QPPolyField::rescale`]). After each
//! composition the normal form at a grid point is re-read directly from the
//! φ-averages of the lower-degree coefficients ([`nf_from_averages`]), so the
//! gap `G = lower(X) − N` has zero average on every monomial the normal form
//! can absorb; the one it cannot — the constant of the slow component — is
//! killed by the next step's translation. This is an exact reorganization of
//! the textbook ordering (normal form first, drift update second) with the
//! same fixed point, and it keeps the engine self-consistent without
//! first-order drift-update formulas (those remain available in
//! [`crate::translate`] as diagnostics).
//!
//! Each step computes the new field by *direct composition*
//! `X⁺ = (E + DW)⁻¹ (X∘T − ω∂_φ W)` rather than by accumulating the printed
//! remainder blocks; the remainder formulas ([`crate::homological::build_remainders`])
//! are then independent cross-checks, not the mechanism.
//!
//! Norms reported in [`StepRecord`] are measured at the *fixed* limiting radii
//! `(r0/2, s0/2)` — the infimum of the shrinking domain schedule — so that the
//! contraction exponent is not confounded by the domain changing under the
//! norm. The slow component is divided by ε0² (its overall weight) so all
//! three components are comparable.

use crate::field::{
    complexify_field, compose, MonomialIndex, PointTransform, PolySeries, QPPolyField,
};
use crate::fourier::FourierSeries;
use crate::grid::{centered_diff, ParamGrid};
use crate::homological::{solve_chain, HomologicalProblem, NormalFormPoint};
use crate::resonance::{exclude_melnikov, ParameterSet, ResonanceData};
use crate::sysspec::{GridSystem, NumericsConfig, SystemSpec};
use crate::translate::{select_case, smallest_real_root, ShiftCase};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

/// Lower bound demanded of the normalized constant/linear forcing averages
/// when classifying the translation regime.
const CASE_FLOOR: f64 = 1e-2;

/// Floor on `|Ω1|` below which the cubic term no longer supplies the missing
/// non-degeneracy.
const OMEGA1_FLOOR: f64 = 1e-8;

/// The step-size, domain-loss, and truncation-order schedule of the
/// iteration.
///
/// * `ε_0 = ε0⁴ = ε` (the physical forcing strength), `ε_1 = ε0^ι` with the
///   case exponent ι, and `ε_{ν+1} = ε_ν^{9/8}` afterwards;
/// * `γ_ν = γ0/(ν+1)²`;
/// * `K_0 = ⌈−(8/r0) ln ε0⌉` and `K_ν = ⌈(1/r0)(ν+1)² 2^{ν+2} (−ln ε_1)⌉`,
///   both capped at `kcap`;
/// * `σ_ν = (Σ_{j≤ν} j⁻²)/(2ζ(2))` grows from 0 to 1/2, and the analyticity
///   radii shrink as `r_ν = (1−σ_ν) r0`, `s_ν = (1−σ_ν) s0`.
#[derive(Debug, Clone)]
pub struct IterationSchedule {
    pub eps0: f64,
    pub gamma0: f64,
    /// Case exponent ι in `ε_1 = ε0^ι`.
    pub iota: f64,
    pub r0: f64,
    pub s0: f64,
    pub kcap: usize,
}

impl IterationSchedule {
    fn eps1(&self) -> f64 {
        self.eps0.powf(self.iota)
    }

    pub fn eps_nu(&self, nu: usize) -> f64 {
        if nu == 0 {
            self.eps0.powi(4)
        } else {
            self.eps1().powf(1.125f64.powi(nu as i32 - 1))
        }
    }

    pub fn gamma_nu(&self, nu: usize) -> f64 {
        self.gamma0 / ((nu + 1) as f64).powi(2)
    }

    pub fn k_nu(&self, nu: usize) -> usize {
        let raw = if nu == 0 {
            -8.0 * self.eps0.ln() / self.r0
        } else {
            ((nu + 1) as f64).powi(2) * 2f64.powi(nu as i32 + 2) * (-self.eps1().ln()) / self.r0
        };
        (raw.ceil().max(1.0) as usize).min(self.kcap)
    }

    pub fn sigma_nu(&self, nu: usize) -> f64 {
        let zeta2 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
        (1..=nu).map(|j| 1.0 / (j * j) as f64).sum::<f64>() / (2.0 * zeta2)
    }

    pub fn r_nu(&self, nu: usize) -> f64 {
        (1.0 - self.sigma_nu(nu)) * self.r0
    }

    pub fn s_nu(&self, nu: usize) -> f64 {
        (1.0 - self.sigma_nu(nu)) * self.s0
    }
}

/// Reads the normal form off the φ-averages of the lower-degree coefficients
/// of an actual-units field: `Ω1, e2, e1` from the slow-component ladder
/// (divided by its ε0² weight) and the conjugate multiplier pair from the
/// rotation diagonal, symmetrized so `μ3 = conj μ2` exactly.
pub fn nf_from_averages(x: &QPPolyField, eps0: f64) -> NormalFormPoint {
    let e0sq = eps0 * eps0;
    let avg1 = |l1: u32| x.comps[0].coeff(&MonomialIndex::new(l1, 0, 0)).average();
    let m2 = x.comps[1].coeff(&MonomialIndex::new(0, 1, 0)).average();
    let m3 = x.comps[2].coeff(&MonomialIndex::new(0, 0, 1)).average();
    let mu2 = 0.5 * (m2 + m3.conj());
    NormalFormPoint {
        omega1: avg1(3).re / e0sq,
        e2: avg1(2).re / e0sq,
        e1: avg1(1).re / e0sq,
        mu2,
        mu3: mu2.conj(),
    }
}

/// `G = lower(X − N)`: the lower-degree gap the step must remove.
fn lower_gap(x: &QPPolyField, nf: &NormalFormPoint, eps0: f64) -> QPPolyField {
    let nfield = nf.field(x.n0, x.kmax, x.d, x.r, x.s, eps0);
    let mut g = x.clone();
    g.add_scaled(&nfield, -Complex64::ONE);
    g.split_lower_higher().0
}

/// Component-normalized weighted norm: slow component divided by its ε0²
/// weight so the three components are on the same scale.
fn normalized_norm(f: &QPPolyField, eps0: f64, r: f64, s: f64) -> f64 {
    let c1 = f.comps[0].norm(r, s) / (eps0 * eps0);
    c1.max(f.comps[1].norm(r, s)).max(f.comps[2].norm(r, s))
}

/// Solves `(E + DW) Y = rhs` by the Neumann fixed point `Y ← rhs − DW·Y`
/// (`‖DW‖ < 1` by the smallness of the step transform). Returns the solution
/// and the final update size; `dropped` accumulates an upper bound on
/// everything lost to degree/Fourier truncation across the sweeps.
fn invert_jacobian(
    rhs: &QPPolyField,
    t: &PointTransform,
    dropped: &mut f64,
) -> (QPPolyField, f64) {
    let (d, s) = (rhs.d, rhs.s);
    let dw: [[PolySeries; 3]; 3] = core::array::from_fn(|i| core::array::from_fn(|j| t.w[i].d_dw(j)));
    let scale = rhs
        .comps
        .iter()
        .map(|c| c.norm(0.0, 1.0))
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut y = rhs.clone();
    let mut defect = f64::INFINITY;
    for _ in 0..60 {
        let mut next = rhs.clone();
        for i in 0..3 {
            for j in 0..3 {
                if dw[i][j].is_zero() || y.comps[j].is_zero() {
                    continue;
                }
                let prod = dw[i][j].mul(&y.comps[j], d, s, dropped);
                next.comps[i].add_scaled(&prod, -Complex64::ONE);
            }
        }
        defect = (0..3)
            .map(|i| next.comps[i].max_coeff_diff(&y.comps[i]))
            .fold(0.0, f64::max);
        y = next;
        if defect < 1e-18 * scale {
            break;
        }
    }
    (y, defect)
}

/// Evaluates a poly-series at Fourier-series arguments (used when collapsing
/// the transform chain into the torus embedding).
fn poly_at_fourier(
    p: &PolySeries,
    w: &[FourierSeries; 3],
    r: f64,
    dropped: &mut f64,
) -> FourierSeries {
    let (n0, kmax) = (w[0].n0, w[0].kmax);
    let one = FourierSeries::constant(n0, kmax, r, Complex64::ONE);
    let mut max_e = [0u32; 3];
    for (l, _) in p.iter() {
        max_e[0] = max_e[0].max(l.l1);
        max_e[1] = max_e[1].max(l.l2);
        max_e[2] = max_e[2].max(l.l3);
    }
    let mut pows: [Vec<FourierSeries>; 3] = [vec![one.clone()], vec![one.clone()], vec![one]];
    for j in 0..3 {
        for _ in 1..=max_e[j] {
            let next = pows[j].last().unwrap().mul(&w[j], r, dropped);
            pows[j].push(next);
        }
    }
    let mut out = FourierSeries::zero(n0, kmax, r);
    for (l, f) in p.iter() {
        let t = f
            .mul(&pows[0][l.l1 as usize], r, dropped)
            .mul(&pows[1][l.l2 as usize], r, dropped)
            .mul(&pows[2][l.l3 as usize], r, dropped);
        out.add_scaled(&t, Complex64::ONE);
    }
    out
}

/// Per-parameter-point iteration state.
#[derive(Debug, Clone)]
pub struct PointState {
    pub valid: bool,
    /// Current actual-units complex field.
    pub x: QPPolyField,
    pub nf: NormalFormPoint,
    /// Reason this point stopped iterating, if it did.
    pub failure: Option<String>,
}

/// Everything measured during one iteration step (maxima over the surviving
/// grid points).
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub nu: usize,
    pub eps_nu: f64,
    pub gamma_nu: f64,
    pub k_nu: usize,
    /// Parameter measure removed by this step's Melnikov exclusion.
    pub removed_measure: f64,
    pub measure_after: f64,
    pub valid_points: usize,
    pub gnorm_before: f64,
    pub gnorm_after: f64,
    pub fnorm_after: f64,
    /// `max ‖T_ν − id‖` over the grid.
    pub max_transform_norm: f64,
    pub max_w10: f64,
    /// Worst reality defect of the composed field before re-projection.
    pub max_reality_violation: f64,
    /// Worst truncation loss (degree + Fourier) accumulated at one point.
    pub max_dropped: f64,
    /// Worst final Neumann update when inverting `E + DW`.
    pub max_neumann_defect: f64,
}

/// Final output: per-parameter torus embeddings in the original real
/// variables, together with the certified parameter set.
#[derive(Debug, Clone)]
pub struct TorusSolution {
    pub grid: ParamGrid,
    pub n0: usize,
    pub eps: f64,
    pub eps0: f64,
    /// Frequency vector per grid point.
    pub omega: Vec<Vec<f64>>,
    pub set: ParameterSet,
    pub valid: Vec<bool>,
    /// `(v1, v2, v3)(φ)` per surviving grid point, `None` where excluded.
    pub embedding: Vec<Option<[FourierSeries; 3]>>,
}

impl TorusSolution {
    /// The embedded point at angle `φ` (real part; the imaginary dust is
    /// bounded by the recorded reality defects).
    pub fn eval(&self, i: usize, phi: &[f64]) -> Option<[f64; 3]> {
        self.embedding[i]
            .as_ref()
            .map(|e| [e[0].eval(phi).re, e[1].eval(phi).re, e[2].eval(phi).re])
    }

    /// Worst conjugate-symmetry defect of the stored embeddings.
    pub fn reality_defect(&self) -> f64 {
        self.embedding
            .iter()
            .flatten()
            .flat_map(|e| e.iter())
            .map(|f| f.symmetry_violation())
            .fold(0.0, f64::max)
    }
}

/// Outcome of a full run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub case: ShiftCase,
    /// Whether `ε0 ≤ γ0^p` (the certified-regime gate) held.
    pub gate_satisfied: bool,
    pub converged: bool,
    pub steps: Vec<StepRecord>,
    pub pi0_measure: f64,
    pub final_measure: f64,
    pub solution: TorusSolution,
}

struct PointOutcome {
    t: PointTransform,
    x: QPPolyField,
    nf: NormalFormPoint,
    gnorm_before: f64,
    gnorm_after: f64,
    fnorm_after: f64,
    w10: f64,
    tnorm: f64,
    reality: f64,
    dropped: f64,
    neumann_defect: f64,
}

enum Outcome {
    Skip,
    Done(Box<PointOutcome>),
    Fail(String),
}

/// One full iteration step at a single parameter point: homological solve,
/// translation, composition, Jacobian inversion, reality projection, and
/// normal-form re-read.
fn point_step(
    st: &PointState,
    omega: &[f64],
    kcut: usize,
    eps0: f64,
    r_ev: f64,
    s_ev: f64,
    prune_thr: f64,
) -> Result<Box<PointOutcome>> {
    let x = &st.x;
    let glow = lower_gap(x, &st.nf, eps0);
    let gnorm_before = normalized_norm(&glow, eps0, r_ev, s_ev);

    let prob = HomologicalProblem { omega, kcut, nf: st.nf, eps0, g_lower: &glow };
    let sol = solve_chain(&prob)?;

    // translation: the gap's constant drift is killed by shifting the slow
    // coordinate to the smallest real root of the drifted cubic (the other
    // ladder drifts vanish by the averages convention, but are included for
    // exactness)
    let e0sq = eps0 * eps0;
    let g1 = |i: usize| sol.drift.g1[i].re / e0sq;
    let (b3, b2, b1, b0) = (st.nf.omega1 + g1(3), st.nf.e2 + g1(2), st.nf.e1 + g1(1), g1(0));
    if b3.abs() < OMEGA1_FLOOR {
        return Err(Error::HypothesisViolation(format!(
            "cubic coefficient Ω1 = {b3:.3e} degenerated below {OMEGA1_FLOOR:.1e}"
        )));
    }
    let w10 = smallest_real_root(b3, b2, b1, b0)?;

    // T: w = w+ + (w10,0,0) + U(φ, w1+ + w10, w2+, w̄2+)
    let (n0, kmax, d, r, s) = (x.n0, x.kmax, x.d, x.r, x.s);
    let mut dropped = 0.0;
    let mut im0 = PolySeries::var(n0, kmax, r, 0);
    im0.add_scaled(
        &PolySeries::constant(n0, kmax, r, Complex64::new(w10, 0.0)),
        Complex64::ONE,
    );
    let images = [im0, PolySeries::var(n0, kmax, r, 1), PolySeries::var(n0, kmax, r, 2)];
    let w: [PolySeries; 3] =
        core::array::from_fn(|j| sol.u[j].substitute(&images, d, s, &mut dropped));
    let t = PointTransform { w0: [Complex64::new(w10, 0.0), Complex64::ZERO, Complex64::ZERO], w };

    // X⁺ = (E + DW)⁻¹ (X∘T − ω∂_φ W)
    let (mut rhs, drop2) = compose(x, &t);
    dropped += drop2;
    for j in 0..3 {
        let dphi = t.w[j].dphi_along(omega);
        rhs.comps[j].add_scaled(&dphi, -Complex64::ONE);
    }
    let (mut xn, neumann_defect) = invert_jacobian(&rhs, &t, &mut dropped);

    let reality = xn.reality_violation();
    xn.enforce_reality();
    xn.prune_below(prune_thr);

    let nf = nf_from_averages(&xn, eps0);
    let gnorm_after = normalized_norm(&lower_gap(&xn, &nf, eps0), eps0, r_ev, s_ev);
    let fnorm_after = normalized_norm(&xn, eps0, r_ev, s_ev);
    let tnorm = t.norm(r_ev, s_ev);

    Ok(Box::new(PointOutcome {
        t,
        x: xn,
        nf,
        gnorm_before,
        gnorm_after,
        fnorm_after,
        w10,
        tnorm,
        reality,
        dropped,
        neumann_defect,
    }))
}

/// The iteration driver over the whole parameter grid.
pub struct Engine {
    pub sys: GridSystem,
    pub eps: f64,
    pub eps0: f64,
    pub gamma0: f64,
    pub case: ShiftCase,
    pub gate_satisfied: bool,
    pub schedule: IterationSchedule,
    pub set: ParameterSet,
    pub states: Vec<PointState>,
    /// Per step, per grid point, the applied transform (`None` once a point
    /// stops iterating).
    pub chain: Vec<Vec<Option<PointTransform>>>,
    pub records: Vec<StepRecord>,
    pub tol: f64,
    deriv_floor: Option<f64>,
    prune_thr: f64,
}

impl Engine {
    pub fn from_spec(spec: &SystemSpec) -> Result<Engine> {
        let sys = spec.build()?;
        Engine::new(sys, spec.eps, spec.gamma0, &spec.numerics)
    }

    pub fn new(
        sys: GridSystem,
        eps: f64,
        gamma0: f64,
        numerics: &NumericsConfig,
    ) -> Result<Engine> {
        if eps <= 0.0 {
            return Err(Error::InvalidInput(
                "the iteration requires ε > 0 (ε = 0 is handled trivially by solve_system)".into(),
            ));
        }
        let eps0 = eps.powf(0.25);
        let n = sys.grid.n;
        let mut states = Vec::with_capacity(n);
        let mut g000n = Vec::with_capacity(n);
        let mut g100n = Vec::with_capacity(n);
        let l000 = MonomialIndex::new(0, 0, 0);
        let l100 = MonomialIndex::new(1, 0, 0);
        for p in &sys.points {
            let x = complexify_field(&p.assemble(eps)).rescale(eps)?;
            g000n.push(x.comps[0].coeff(&l000).average().re / eps0.powi(3));
            g100n.push(x.comps[0].coeff(&l100).average().re / eps0.powi(4));
            let nf = nf_from_averages(&x, eps0);
            states.push(PointState { valid: true, x, nf, failure: None });
        }

        let case = select_case(&g000n, &g100n, CASE_FLOOR, &sys.grid)?;
        let gate = gamma0.powf(case.gamma_gate_exponent());
        let gate_satisfied = eps0 <= gate;
        if !gate_satisfied && !numerics.case_override {
            return Err(Error::HypothesisViolation(format!(
                "ε0 = {eps0:.3e} exceeds the smallness gate γ0^{} = {gate:.3e} of the certified \
                 regime; set numerics.case_override to run outside it (convergence is then \
                 certified a posteriori by the step records)",
                case.gamma_gate_exponent()
            )));
        }

        let iota = case.exponents().2;
        let schedule = IterationSchedule { eps0, gamma0, iota, r0: sys.r, s0: sys.s, kcap: sys.kmax };

        // transversality floor of the normal frequency in the parameter
        let om2: Vec<f64> = states.iter().map(|s| s.nf.im_omega2()).collect();
        let dv = centered_diff(&om2, sys.grid.spacing());
        let c0 = dv.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let sign_change = dv.iter().any(|&x| x > 0.0) && dv.iter().any(|&x| x < 0.0);
        let deriv_floor = if c0 > 1e-10 && !sign_change { Some(0.5 * c0) } else { None };

        let set = ParameterSet::interval(sys.grid.a_min, sys.grid.a_max);
        let tol = numerics.tol;
        let prune_thr = (tol * eps0 * eps0 * 1e-8).max(1e-280);
        Ok(Engine {
            sys,
            eps,
            eps0,
            gamma0,
            case,
            gate_satisfied,
            schedule,
            set,
            states,
            chain: Vec::new(),
            records: Vec::new(),
            tol,
            deriv_floor,
            prune_thr,
        })
    }

    /// Runs one step: exclusion at `(γ_ν, K_ν)` against the current normal
    /// frequencies, then the per-point transform and composition. The record
    /// is appended to `self.records` and also returned.
    pub fn step(&mut self) -> Result<StepRecord> {
        let nu = self.records.len();
        let gamma = self.schedule.gamma_nu(nu);
        let k_nu = self.schedule.k_nu(nu);

        let data = ResonanceData {
            grid: self.sys.grid,
            omega: self.sys.omega.clone(),
            om2_im: self.states.iter().map(|s| s.nf.im_omega2()).collect(),
        };
        let (new_set, removed) = exclude_melnikov(&self.set, &data, gamma, k_nu, self.deriv_floor)?;
        self.set = new_set;

        let grid = self.sys.grid;
        let eps0 = self.eps0;
        let (r_ev, s_ev) = (0.5 * self.sys.r, 0.5 * self.sys.s);
        let prune_thr = self.prune_thr;
        let states = &self.states;
        let set = &self.set;
        let omega = &self.sys.omega;
        let outcomes: Vec<Outcome> = (0..grid.n)
            .into_par_iter()
            .map(|i| {
                let st = &states[i];
                if !st.valid || !set.contains(grid.value(i)) {
                    return Outcome::Skip;
                }
                match point_step(st, &omega[i], k_nu, eps0, r_ev, s_ev, prune_thr) {
                    Ok(o) => Outcome::Done(o),
                    Err(e) => Outcome::Fail(e.to_string()),
                }
            })
            .collect();

        let mut chain_row: Vec<Option<PointTransform>> = vec![None; grid.n];
        let mut rec = StepRecord {
            nu,
            eps_nu: self.schedule.eps_nu(nu),
            gamma_nu: gamma,
            k_nu,
            removed_measure: removed,
            measure_after: 0.0,
            valid_points: 0,
            gnorm_before: 0.0,
            gnorm_after: 0.0,
            fnorm_after: 0.0,
            max_transform_norm: 0.0,
            max_w10: 0.0,
            max_reality_violation: 0.0,
            max_dropped: 0.0,
            max_neumann_defect: 0.0,
        };
        let mut failures: Vec<usize> = Vec::new();
        let mut first_failure: Option<String> = None;
        for (i, o) in outcomes.into_iter().enumerate() {
            match o {
                Outcome::Skip => {
                    self.states[i].valid = false;
                }
                Outcome::Fail(msg) => {
                    self.states[i].valid = false;
                    if first_failure.is_none() {
                        first_failure = Some(format!("a = {:.6}: {msg}", grid.value(i)));
                    }
                    self.states[i].failure = Some(msg);
                    failures.push(i);
                }
                Outcome::Done(o) => {
                    let st = &mut self.states[i];
                    st.x = o.x;
                    st.nf = o.nf;
                    chain_row[i] = Some(o.t);
                    rec.valid_points += 1;
                    rec.gnorm_before = rec.gnorm_before.max(o.gnorm_before);
                    rec.gnorm_after = rec.gnorm_after.max(o.gnorm_after);
                    rec.fnorm_after = rec.fnorm_after.max(o.fnorm_after);
                    rec.max_transform_norm = rec.max_transform_norm.max(o.tnorm);
                    rec.max_w10 = rec.max_w10.max(o.w10.abs());
                    rec.max_reality_violation = rec.max_reality_violation.max(o.reality);
                    rec.max_dropped = rec.max_dropped.max(o.dropped);
                    rec.max_neumann_defect = rec.max_neumann_defect.max(o.neumann_defect);
                }
            }
        }
        // a point-level failure certifies nothing about its neighborhood:
        // excise one grid cell around it
        let h = grid.spacing();
        for i in failures {
            let a = grid.value(i);
            self.set.subtract_interval(a - 0.5 * h, a + 0.5 * h);
        }
        rec.measure_after = self.set.measure();
        if rec.valid_points == 0 {
            return Err(Error::StepFailure {
                step: nu,
                detail: format!(
                    "no valid parameter points remain{}",
                    first_failure.map(|m| format!(" (first failure: {m})")).unwrap_or_default()
                ),
            });
        }
        self.chain.push(chain_row);
        self.records.push(rec.clone());
        Ok(rec)
    }

    /// Iterates until the lower-degree gap falls below the tolerance or
    /// `max_steps` is reached; returns the composed torus and all records.
    pub fn run(&mut self, max_steps: usize) -> Result<RunResult> {
        let mut converged = false;
        for _ in 0..max_steps {
            let rec = self.step()?;
            if rec.gnorm_after > 1e3 * (rec.gnorm_before + 1e-30) {
                return Err(Error::StepFailure {
                    step: rec.nu,
                    detail: format!(
                        "iteration diverged: gap grew from {:.3e} to {:.3e}",
                        rec.gnorm_before, rec.gnorm_after
                    ),
                });
            }
            if rec.gnorm_after < self.tol {
                converged = true;
                break;
            }
        }
        Ok(RunResult {
            case: self.case,
            gate_satisfied: self.gate_satisfied,
            converged,
            steps: self.records.clone(),
            pi0_measure: self.sys.grid.a_max - self.sys.grid.a_min,
            final_measure: self.set.measure(),
            solution: self.torus(),
        })
    }

    /// Folds the transform chain, innermost first, through `w+ = 0` and
    /// un-does the rescaling/complexification: `v1 = ε0 w1`,
    /// `v2 = ε0² (w2+w̄2)/2`, `v3 = ε0² (w2−w̄2)/(2i)`.
    pub fn torus(&self) -> TorusSolution {
        let (n0, kmax, r) = (self.sys.n0, self.sys.kmax, self.sys.r);
        let eps0 = self.eps0;
        let e0sq = eps0 * eps0;
        let embedding: Vec<Option<[FourierSeries; 3]>> = (0..self.sys.grid.n)
            .into_par_iter()
            .map(|i| {
                if !self.states[i].valid {
                    return None;
                }
                let mut cur: [FourierSeries; 3] =
                    core::array::from_fn(|_| FourierSeries::zero(n0, kmax, r));
                for row in self.chain.iter().rev() {
                    let t = row[i].as_ref()?;
                    let mut dropped = 0.0;
                    let mut next: [FourierSeries; 3] =
                        core::array::from_fn(|j| poly_at_fourier(&t.w[j], &cur, r, &mut dropped));
                    for j in 0..3 {
                        next[j].add_scaled(&cur[j], Complex64::ONE);
                        next[j].add_scaled(
                            &FourierSeries::constant(n0, kmax, r, t.w0[j]),
                            Complex64::ONE,
                        );
                    }
                    cur = next;
                }
                let mut v1 = cur[0].scaled(Complex64::new(eps0, 0.0));
                let mut v2 = cur[1].add(&cur[2]).scaled(Complex64::new(0.5 * e0sq, 0.0));
                let mut v3 = cur[1].sub(&cur[2]).scaled(Complex64::new(0.0, -0.5 * e0sq));
                for f in [&mut v1, &mut v2, &mut v3] {
                    f.symmetrize();
                    f.prune_below(1e-300);
                }
                Some([v1, v2, v3])
            })
            .collect();
        TorusSolution {
            grid: self.sys.grid,
            n0,
            eps: self.eps,
            eps0,
            omega: self.sys.omega.clone(),
            set: self.set.clone(),
            valid: self.states.iter().map(|s| s.valid).collect(),
            embedding,
        }
    }
}

/// End-to-end convenience: build, iterate, compose. `ε = 0` is the exact
/// unforced case — the origin is already the invariant torus, so only the
/// frequency-zone exclusion is performed.
pub fn solve_system(spec: &SystemSpec, max_steps: usize) -> Result<RunResult> {
    if spec.eps == 0.0 {
        let sys = spec.build()?;
        let data = ResonanceData {
            grid: sys.grid,
            omega: sys.omega.clone(),
            om2_im: sys.points.iter().map(|p| p.omega2).collect(),
        };
        let pi0 = ParameterSet::interval(sys.grid.a_min, sys.grid.a_max);
        let (set, _) = exclude_melnikov(&pi0, &data, spec.gamma0, sys.kmax.min(64), None)?;
        let zero: [FourierSeries; 3] =
            core::array::from_fn(|_| FourierSeries::zero(sys.n0, sys.kmax, sys.r));
        let valid: Vec<bool> = (0..sys.grid.n).map(|i| set.contains(sys.grid.value(i))).collect();
        let embedding = valid.iter().map(|&v| v.then(|| zero.clone())).collect();
        return Ok(RunResult {
            case: ShiftCase::Case2,
            gate_satisfied: true,
            converged: true,
            steps: Vec::new(),
            pi0_measure: sys.grid.a_max - sys.grid.a_min,
            final_measure: set.measure(),
            solution: TorusSolution {
                grid: sys.grid,
                n0: sys.n0,
                eps: 0.0,
                eps0: 0.0,
                omega: sys.omega.clone(),
                set,
                valid,
                embedding,
            },
        });
    }
    let mut engine = Engine::from_spec(spec)?;
    engine.run(max_steps)
}
