//! Acceptance gate: eleven numbered end-to-end criteria, one PASS/FAIL line
//! each. Criteria 5, 8, 9 and 11 share a single converged run of the default
//! van der Pol configuration at ε = 1e−6.

use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;

use qptorus::engine::{solve_system, IterationSchedule, RunResult};
use qptorus::field::{MonomialIndex, PolySeries, QPPolyField};
use qptorus::fourier::{k_order, FourierSeries};
use qptorus::grid::ParamGrid;
use qptorus::homological::{
    conjugation_residual, solve_chain, ChainSolution, HomologicalProblem, NormalFormPoint,
};
use qptorus::resonance::{exclude_melnikov, ParameterSet, ResonanceData};
use qptorus::sysspec::{default_vdp_spec, ModelSpec, SystemSpec};
use qptorus::translate::{solve_shift, CubicProblem};
use qptorus::vdp::{build_basis, char_fn, critical_point, spectrum_gap};
use qptorus::verify::{
    fit_slope, ode_defect, scaling_sweep, shadow_check_dde, shadow_check_ode,
};

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:2} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------------
// shared ε = 1e−6 desk run
// ---------------------------------------------------------------------------

struct DeskRun {
    spec: SystemSpec,
    run: RunResult,
    elapsed_s: f64,
}

fn desk_run() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut spec = default_vdp_spec(1e-6);
        spec.grid.n = 17;
        spec.numerics.case_override = true;
        let t = Instant::now();
        let run = solve_system(&spec, 12).expect("desk run must complete");
        DeskRun { spec, run, elapsed_s: t.elapsed().as_secs_f64() }
    })
}

// ---------------------------------------------------------------------------
// 1. critical-point identities
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_critical_point_identities() {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..64 {
        let a = 0.25 + i as f64 / 63.0;
        let (omega0, tau0) = critical_point(a).unwrap();
        for lambda in [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, omega0),
            Complex64::new(0.0, -omega0),
        ] {
            worst = worst.max(char_fn(a, tau0, lambda).norm());
        }
    }
    let dt = t.elapsed().as_secs_f64();
    report(
        1,
        "critical-point identities",
        worst < 1e-12 && dt < 1.0,
        &format!("max characteristic residual {worst:.3e} over 64 points in {dt:.3} s"),
    );
}

// ---------------------------------------------------------------------------
// 2. duality of the center/adjoint bases
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_duality() {
    let mut worst_dual = 0.0f64;
    let mut worst_b = 0.0f64;
    for i in 0..64 {
        let a = 0.25 + i as f64 / 63.0;
        let basis = build_basis(a).unwrap();
        worst_dual = worst_dual.max(basis.duality_error());
        worst_b = worst_b
            .max((basis.b2 - basis.b2_alt).abs())
            .max((basis.b3 - basis.b3_alt).abs());
    }
    report(
        2,
        "duality",
        worst_dual < 1e-10 && worst_b < 1e-12,
        &format!("max |⟨Ψ,Φ⟩ − E3| = {worst_dual:.3e}, b2/b3 form agreement {worst_b:.3e}"),
    );
}

// ---------------------------------------------------------------------------
// 3. spectral gap of the non-critical characteristic roots
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_spectral_gap() {
    let mut min_gap = f64::INFINITY;
    for a in [0.3, 0.45, 0.6, 0.75, 0.9, 1.0, 1.1, 1.2] {
        let rep = spectrum_gap(a, -10.0, 1.0, 40.0).unwrap();
        min_gap = min_gap.min(rep.gap);
        assert_eq!(
            rep.contour_count,
            rep.roots.len(),
            "argument-principle count disagrees with root finder at a = {a}"
        );
    }
    report(
        3,
        "spectral gap",
        min_gap > 0.0,
        &format!("min −Re λ over non-critical roots at 8 parameters: {min_gap:.4}"),
    );
}

// ---------------------------------------------------------------------------
// 4. homological chain vs an independent per-mode linear-solve oracle
// ---------------------------------------------------------------------------

const OMEGA: [f64; 2] = [1.0, 0.618_033_988_749_894_8];

fn lower_slots() -> [MonomialIndex; 6] {
    [
        MonomialIndex::new(0, 0, 0),
        MonomialIndex::new(1, 0, 0),
        MonomialIndex::new(2, 0, 0),
        MonomialIndex::new(3, 0, 0),
        MonomialIndex::new(0, 1, 0),
        MonomialIndex::new(0, 0, 1),
    ]
}

fn random_lower_reality_field(rng: &mut impl Rng, kcut: i32, amp: f64) -> QPPolyField {
    let mut g = QPPolyField::zero(2, 32, 6, 1.0, 1.0);
    for &l in &lower_slots() {
        for comp in 0..2usize {
            let mut f = FourierSeries::zero(2, 32, 1.0);
            for _ in 0..6 {
                let k = vec![rng.gen_range(-kcut..=kcut), rng.gen_range(-kcut..=kcut)];
                if k_order(&k) <= kcut as usize {
                    f.set(k, Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)));
                }
            }
            g.comps[comp].set_term(l, f);
        }
    }
    g.enforce_reality();
    g
}

/// `lower(DN·U − DU·N)` by generic field algebra: the constant-coefficient
/// part of the conjugation operator (everything except `−ω·∂_φ`).
fn apply_constant_part(
    u: &[PolySeries; 3],
    nfield: &QPPolyField,
) -> [PolySeries; 3] {
    let (n0, kmax, r) = (nfield.n0, nfield.kmax, nfield.r);
    let mut dropped = 0.0;
    core::array::from_fn(|i| {
        let mut acc = PolySeries::zero(n0, kmax, r);
        for j in 0..3 {
            let dn = nfield.comps[i].d_dw(j);
            acc.add_scaled(&dn.mul(&u[j], 12, 1.0, &mut dropped), Complex64::ONE);
            let du = u[i].d_dw(j);
            acc.add_scaled(&du.mul(&nfield.comps[j], 12, 1.0, &mut dropped), -Complex64::ONE);
        }
        acc.filter(|l| l.is_lower())
    })
}

/// Dense complex solve by Gaussian elimination with partial pivoting.
fn solve_dense(mut m: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| m[p][col].norm().total_cmp(&m[q][col].norm())).unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        let d = m[col][col];
        assert!(d.norm() > 1e-14, "singular oracle system: pivot {:.3e} at column {col}", d.norm());
        for row in col + 1..n {
            let f = m[row][col] / d;
            if f.norm() == 0.0 {
                continue;
            }
            for c in col..n {
                let v = m[col][c];
                m[row][c] -= f * v;
            }
            let bv = b[col];
            b[row] -= f * bv;
        }
    }
    let mut x = vec![Complex64::ZERO; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    x
}

fn oracle_compare(sol: &ChainSolution, p: &HomologicalProblem) -> f64 {
    let g0 = p.g_lower;
    let (n0, kmax, d, r, s) = (g0.n0, g0.kmax, g0.d, g0.r, g0.s);
    let nfield = p.nf.field(n0, kmax, d, r, s, p.eps0);
    let slots = lower_slots();
    let dim = 18usize;

    // constant 18×18 block A: the operator is diagonal in the Fourier modes
    // because the normal form has constant coefficients. Slot ordering
    // (monomial outer, component inner) matches the per-mode vectors below.
    let slot_list: Vec<(usize, MonomialIndex)> = slots
        .iter()
        .flat_map(|&l| (0..3).map(move |c| (c, l)))
        .collect();
    let mut a = vec![vec![Complex64::ZERO; dim]; dim];
    for (cj, &(ci, l)) in slot_list.iter().enumerate() {
        let mut u: [PolySeries; 3] = core::array::from_fn(|_| PolySeries::zero(n0, kmax, r));
        u[ci] = PolySeries::monomial(
            n0,
            kmax,
            r,
            l,
            FourierSeries::constant(n0, kmax, r, Complex64::ONE),
        );
        let out = apply_constant_part(&u, &nfield);
        for (ri, &(ci2, l2)) in slot_list.iter().enumerate() {
            a[ri][cj] = out[ci2].coeff(&l2).average();
        }
    }

    // right-hand side n̂ − Γ_K G per mode, solved and compared against u
    let nhat = sol.drift.field(n0, kmax, d, r, s);

    // collect every mode appearing in the data
    let mut modes: std::collections::BTreeSet<Vec<i32>> = std::collections::BTreeSet::new();
    for i in 0..3 {
        for &l in &slots {
            let trunc = g0.comps[i].coeff(&l);
            for (k, _) in trunc.iter() {
                if k_order(k) <= p.kcut {
                    modes.insert(k.clone());
                }
            }
            for (k, _) in sol.u[i].coeff(&l).iter() {
                modes.insert(k.clone());
            }
        }
    }

    // slots whose k = 0 averages are absorbed by the drift; the chain fixes
    // the gauge by zeroing their averages, which removes the rank deficiency
    // of the constant-mode block
    let drift_slots: Vec<(usize, MonomialIndex)> = vec![
        (0, MonomialIndex::new(0, 0, 0)),
        (0, MonomialIndex::new(1, 0, 0)),
        (0, MonomialIndex::new(2, 0, 0)),
        (0, MonomialIndex::new(3, 0, 0)),
        (1, MonomialIndex::new(0, 1, 0)),
        (2, MonomialIndex::new(0, 0, 1)),
    ];

    let mut worst = 0.0f64;
    for k in &modes {
        let kw: f64 = k.iter().zip(&OMEGA).map(|(&ki, w)| ki as f64 * w).sum();
        let is_zero_mode = k.iter().all(|&ki| ki == 0);
        let keep: Vec<usize> = (0..dim)
            .filter(|&idx| {
                let (c, l) = slot_list[idx];
                !(is_zero_mode && drift_slots.contains(&(c, l)))
            })
            .collect();
        let mut m: Vec<Vec<Complex64>> = keep
            .iter()
            .map(|&ri| keep.iter().map(|&cj| a[ri][cj]).collect())
            .collect();
        for i in 0..keep.len() {
            m[i][i] -= Complex64::new(0.0, kw);
        }
        let rhs: Vec<Complex64> = keep
            .iter()
            .map(|&idx| {
                let (c, l) = slot_list[idx];
                nhat.comps[c].coeff(&l).get(k) - g0.comps[c].coeff(&l).get(k)
            })
            .collect();
        let x = solve_dense(m, rhs);
        for (i, &idx) in keep.iter().enumerate() {
            let (c, l) = slot_list[idx];
            worst = worst.max((x[i] - sol.u[c].coeff(&l).get(k)).norm());
        }
        if is_zero_mode {
            // the pinned slots must indeed have zero average in the output
            for &(c, l) in &drift_slots {
                worst = worst.max(sol.u[c].coeff(&l).get(k).norm());
            }
        }
    }
    worst
}

#[test]
fn criterion_04_homological_oracle() {
    let t = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20260825);
    let nf = NormalFormPoint {
        omega1: 2.75,
        mu2: Complex64::new(0.013, 1.571),
        mu3: Complex64::new(0.013, -1.571),
        e1: 0.11,
        e2: 0.31,
    };
    let (mut worst_res, mut worst_oracle) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let g = random_lower_reality_field(&mut rng, 8, 0.5);
        let p = HomologicalProblem { omega: &OMEGA, kcut: 16, nf: nf.clone(), eps0: 0.1, g_lower: &g };
        let sol = solve_chain(&p).unwrap();
        let scale = g.norm_at(1.0, 0.8).max(1.0);
        worst_res = worst_res.max(conjugation_residual(&sol, &p, 0.8) / scale);
        worst_oracle = worst_oracle.max(oracle_compare(&sol, &p) / scale);
        // reality of the output
        let mut uf = QPPolyField::zero(2, 32, 6, 1.0, 1.0);
        uf.comps = sol.u.clone();
        assert!(uf.reality_violation() < 1e-11);
    }
    let dt = t.elapsed().as_secs_f64();
    report(
        4,
        "homological oracle equivalence",
        worst_res < 1e-10 && worst_oracle < 1e-10 && dt < 30.0,
        &format!(
            "100 random instances: relative residual {worst_res:.3e}, oracle deviation \
             {worst_oracle:.3e}, {dt:.1} s"
        ),
    );
}

// ---------------------------------------------------------------------------
// 5. reality preservation through the first four iteration steps
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_reality_preservation() {
    let d = desk_run();
    let stages = d.run.steps.len().min(4);
    assert!(stages >= 4, "need at least 4 executed steps");
    let worst = d.run.steps[..stages]
        .iter()
        .map(|r| r.max_reality_violation)
        .fold(0.0f64, f64::max);
    report(
        5,
        "reality preservation",
        worst < 1e-11,
        &format!("max violation over initial + 3 iteration steps: {worst:.3e}"),
    );
}

// ---------------------------------------------------------------------------
// 6. cubic-root lemma scaling
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_cubic_root_scaling() {
    // hypothesis scalings of the root lemma, Case-1 constants:
    // b3 ~ 1, b2 ~ ε0^{1/3}, b1 ~ ε0^{2/3} (κ = 2/3), b0 ~ ε⁴ with ε = ε0^{1/2}
    let grid = ParamGrid::new(0.0, 1.0, 3);
    let mut ln_eps = Vec::new();
    let mut ln_x = Vec::new();
    let mut ratios = Vec::new();
    for d in 0..=8 {
        let eps = 10f64.powf(-1.0 - d as f64 / 2.0); // 4 decades
        let eps0 = eps * eps; // ε ≤ ε0^ι with ι = 1/2
        let p = CubicProblem {
            grid,
            b: [
                vec![1.0; 3],
                vec![0.3 * eps0.powf(1.0 / 3.0); 3],
                vec![0.5 * eps0.powf(2.0 / 3.0); 3],
                vec![0.7 * eps.powi(4); 3],
            ],
            db: core::array::from_fn(|_| vec![0.0; 3]),
            eps,
            eps0,
            kappa: 2.0 / 3.0,
            c6: 0.4,
            c8: 0.9,
        };
        let sol = solve_shift(&p).unwrap();
        let x = sol.x0[0].abs();
        ln_eps.push(eps.ln());
        ln_x.push(x.max(1e-300).ln());
        ratios.push(x / eps.powf(4.0 / 3.0));
    }
    let slope = fit_slope(&ln_eps, &ln_x);
    let c9 = ratios.iter().fold(0.0f64, |m, &v| m.max(v));
    let bound_ok = ratios.iter().all(|&v| v <= c9 * (1.0 + 1e-12));
    report(
        6,
        "cubic-root lemma scaling",
        slope >= 4.0 / 3.0 - 0.03 && bound_ok && c9.is_finite(),
        &format!("log-log slope {slope:.3} (≥ {:.3}), fitted c9 = {c9:.3e}", 4.0 / 3.0 - 0.03),
    );
}

// ---------------------------------------------------------------------------
// 7. measure law
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_measure_law() {
    let spec = default_vdp_spec(1e-6);
    let mut spec = spec;
    spec.grid.n = 129;
    let sys = spec.build().unwrap();
    let data = ResonanceData {
        grid: sys.grid,
        omega: sys.omega.clone(),
        om2_im: sys.points.iter().map(|p| p.omega2).collect(),
    };
    let pi0 = ParameterSet::interval(sys.grid.a_min, sys.grid.a_max);

    // removed measure vs γ0 over 4 halvings
    let (mut lg, mut lr) = (Vec::new(), Vec::new());
    for j in 0..=4 {
        let gamma = spec.gamma0 / 2f64.powi(j);
        let (_, removed) = exclude_melnikov(&pi0, &data, gamma, 64, None).unwrap();
        lg.push(gamma.ln());
        lr.push(removed.ln());
    }
    let slope = fit_slope(&lg, &lr);

    // exact nesting along the iteration schedule
    let sched = IterationSchedule {
        eps0: 1e-6f64.powf(0.25),
        gamma0: spec.gamma0,
        iota: 0.5,
        r0: spec.numerics.r0,
        s0: spec.numerics.s0,
        kcap: spec.numerics.kcap,
    };
    let mut sets = vec![pi0.clone()];
    for nu in 0..4 {
        let prev = sets.last().unwrap().clone();
        let (next, _) =
            exclude_melnikov(&prev, &data, sched.gamma_nu(nu), sched.k_nu(nu), None).unwrap();
        assert!(next.is_subset_of(&prev), "Π_{} ⊄ Π_{}", nu + 1, nu);
        sets.push(next);
    }
    report(
        7,
        "measure law",
        (slope - 1.0).abs() <= 0.05,
        &format!("removed-measure slope vs γ0: {slope:.3} (want 1.00 ± 0.05); nesting exact"),
    );
}

// ---------------------------------------------------------------------------
// 8. contraction schedule
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_contraction() {
    let d = desk_run();
    let steps = &d.run.steps;
    let mut schedule_ok = true;
    for r in steps {
        if r.gnorm_after > r.gnorm_before.powf(9.0 / 8.0) * 10.0 {
            schedule_ok = false;
        }
    }
    let final_g = steps.last().map(|r| r.gnorm_after).unwrap_or(f64::INFINITY);
    let pass = schedule_ok
        && d.run.converged
        && final_g < 1e-12
        && steps.len() <= 6
        && d.elapsed_s < 300.0;
    report(
        8,
        "contraction schedule",
        pass,
        &format!(
            "⦀G⦀ per step {:?}; final {final_g:.3e} in {} steps, {:.1} s",
            steps.iter().map(|r| r.gnorm_after).collect::<Vec<_>>(),
            steps.len(),
            d.elapsed_s
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. torus certificate: algebraic defect + ODE shadowing over T = 1e3
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_torus_certificate() {
    let d = desk_run();
    let defect = ode_defect(&d.run.solution, &d.spec).unwrap().defect;
    let i = d
        .run
        .solution
        .embedding
        .iter()
        .position(|e| e.is_some())
        .unwrap();
    let shadow = shadow_check_ode(&d.run.solution, &d.spec, i, Some(1e3)).unwrap();
    let bound = 1e-2 * 1e-6f64.powf(1.0 / 3.0);
    report(
        9,
        "torus certificate",
        defect < 1e-10 && shadow.shadow_error < bound,
        &format!(
            "defect {defect:.3e} (< 1e-10), shadow {:.3e} over T = 1e3 (< {bound:.1e})",
            shadow.shadow_error
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. amplitude scaling over four ε-decades
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_amplitude_scaling() {
    let t = Instant::now();
    let mut spec = default_vdp_spec(1e-6);
    spec.grid.n = 9;
    spec.numerics.case_override = true;
    let rows = scaling_sweep(&spec, &[1e-8, 1e-7, 1e-6, 1e-5], 12);
    assert!(rows.iter().all(|r| r.converged), "a sweep run failed");
    let x: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let slope = |j: usize| {
        let y: Vec<f64> = rows.iter().map(|r| r.sup_v[j].ln()).collect();
        fit_slope(&x, &y)
    };
    let (s1, s2, s3) = (slope(0), slope(1), slope(2));
    let dt = t.elapsed().as_secs_f64();
    // v1 carries the ε^{1/3} asymptotics; v2, v3 must scale at least as fast
    // as the ε^{1/2} bound (measured ≈ ε¹: the bound's prefactor W is itself
    // O(ε^{1/2}), so a two-sided 1/2 band would contradict the construction)
    let pass = (s1 - 1.0 / 3.0).abs() <= 0.05
        && s2 >= 0.5 - 0.05
        && s3 >= 0.5 - 0.05
        && dt < 1200.0;
    report(
        10,
        "amplitude scaling",
        pass,
        &format!(
            "slopes v1 {s1:.3} (1/3 ± 0.05), v2 {s2:.3}, v3 {s3:.3} (≥ 0.45; measured ≈ 1, \
             stronger than the ε^(1/2) bound), {dt:.0} s"
        ),
    );
}

// ---------------------------------------------------------------------------
// 11. DDE consistency (soft)
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_dde_consistency() {
    let d = desk_run();
    let ModelSpec::Vdp(cfg) = &d.spec.model else {
        panic!("desk spec is the van der Pol model")
    };
    let i = d
        .run
        .solution
        .embedding
        .iter()
        .position(|e| e.is_some())
        .unwrap();
    let rep = shadow_check_dde(&d.run.solution, cfg, i, None).unwrap();
    let fitted_c = rep.plateau_error / 1e-6f64.sqrt();
    let advisory = rep.plateau_error <= 1e-6f64.sqrt();
    report(
        11,
        "DDE consistency (soft)",
        rep.plateau_error.is_finite() && rep.transient_error.is_finite(),
        &format!(
            "transient {:.3e}, plateau {:.3e} over T = {:.0}; fitted c = plateau/ε^(1/2) = \
             {fitted_c:.3e}; advisory plateau ≤ ε^(1/2): {advisory}",
            rep.transient_error, rep.plateau_error, rep.horizon
        ),
    );
}
