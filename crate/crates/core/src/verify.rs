//! Independent validation of an emitted torus: algebraic defect measurement,
//! shadowing against direct ODE integration, shadowing against the *full*
//! delayed van der Pol oscillator, amplitude-scaling sweeps, and spectral
//! frequency measurement of trajectories.
//!
//! Everything here deliberately avoids the engine's internal representations:
//! the torus is consumed only through its Fourier embedding, and the reference
//! dynamics are re-assembled from the system specification (ODE) or integrated
//! as the original second-order delay equation (DDE).

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{num_complex::Complex as FftComplex, FftPlanner};
use serde::Serialize;

use crate::engine::{solve_system, TorusSolution};
use crate::error::Error;
use crate::fourier::FourierSeries;
use crate::integrate::{integrate_dde, integrate_ode, Trajectory};
use crate::sysspec::{HarmonicBasis, SystemSpec, VdpConfig};
use crate::vdp::critical_point;
use crate::Result;

/// Outcome of a defect / shadowing measurement.
///
/// `defect` is the algebraic residual `sup_φ |ω·∂_φ v − X(φ, v)|` (pure
/// algebra, independent of any integration); `shadow_error` is the largest
/// distance between an integrated trajectory started on the torus and the
/// torus evaluation over `[0, horizon]`. Fields that a particular measurement
/// does not produce are `NaN`.
#[derive(Debug, Clone, Serialize)]
pub struct DefectReport {
    pub defect: f64,
    pub shadow_error: f64,
    pub horizon: f64,
    /// Logged Lipschitz estimate of the right-hand side along the trajectory.
    pub lipschitz: f64,
    /// `ln(e^{L·T}·defect·T)`, kept in log form because `e^{L·T}` overflows
    /// for long horizons; the consistency check is `ln(shadow) ≤` this.
    pub gronwall_log_bound: f64,
    /// Largest deviation over the leading 20% of the horizon (DDE shadowing).
    pub transient_error: f64,
    /// Largest deviation over the trailing 50% of the horizon (DDE shadowing).
    pub plateau_error: f64,
}

impl DefectReport {
    fn algebra_only(defect: f64) -> Self {
        DefectReport {
            defect,
            shadow_error: f64::NAN,
            horizon: f64::NAN,
            lipschitz: f64::NAN,
            gronwall_log_bound: f64::NAN,
            transient_error: f64::NAN,
            plateau_error: f64::NAN,
        }
    }
}

/// Calls `f` with every node of the uniform `m^n0` grid on `[0, 2π)^n0`.
fn for_each_phi(n0: usize, m: usize, mut f: impl FnMut(&[f64])) {
    let step = std::f64::consts::TAU / m as f64;
    let mut idx = vec![0usize; n0];
    let mut phi = vec![0.0f64; n0];
    loop {
        for (p, &i) in phi.iter_mut().zip(&idx) {
            *p = i as f64 * step;
        }
        f(&phi);
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == n0 {
                return;
            }
        }
    }
}

/// Algebraic defect of one grid point's embedding on an `m^n0` φ-grid.
fn point_defect(
    emb: &[FourierSeries; 3],
    field: &crate::field::QPPolyField,
    omega: &[f64],
    m: usize,
) -> f64 {
    let dv: Vec<FourierSeries> = emb.iter().map(|e| e.dphi_along(omega)).collect();
    let mut worst = 0.0f64;
    for_each_phi(omega.len(), m, |phi| {
        let v = [
            Complex64::new(emb[0].eval(phi).re, 0.0),
            Complex64::new(emb[1].eval(phi).re, 0.0),
            Complex64::new(emb[2].eval(phi).re, 0.0),
        ];
        let rhs = field.eval(phi, &v);
        for j in 0..3 {
            worst = worst.max((dv[j].eval(phi).re - rhs[j].re).abs());
        }
    });
    worst
}

/// Evaluates `sup_φ |ω·∂_φ v(φ) − X(φ, v(φ))|` on a `64^n0` φ-grid for every
/// validated parameter value and returns the supremum over the grid. The
/// derivative is computed spectrally, so the result is pure algebra.
pub fn ode_defect(torus: &TorusSolution, spec: &SystemSpec) -> Result<DefectReport> {
    ode_defect_on(torus, spec, 64)
}

/// Same as [`ode_defect`] with an explicit φ-grid resolution per angle.
pub fn ode_defect_on(torus: &TorusSolution, spec: &SystemSpec, m: usize) -> Result<DefectReport> {
    let sys = spec.build()?;
    if sys.grid != torus.grid || sys.n0 != torus.n0 {
        return Err(Error::InvalidInput(
            "ode_defect: torus and spec disagree on grid or angle dimension".into(),
        ));
    }
    let defect = (0..sys.grid.n)
        .into_par_iter()
        .map(|i| match &torus.embedding[i] {
            Some(emb) => point_defect(emb, &sys.points[i].assemble(torus.eps), &torus.omega[i], m),
            None => 0.0,
        })
        .reduce(|| 0.0, f64::max);
    Ok(DefectReport::algebra_only(defect))
}

/// Finite-difference ∞-norm Lipschitz estimate of `v ↦ X(φ, v)` near `v`.
fn lipschitz_at(field: &crate::field::QPPolyField, phi: &[f64], v: &[f64; 3]) -> f64 {
    let h = 1e-6;
    let base = field.eval(phi, &v.map(|x| Complex64::new(x, 0.0)));
    let mut row_sums = [0.0f64; 3];
    for j in 0..3 {
        let mut vp = *v;
        vp[j] += h;
        let fp = field.eval(phi, &vp.map(|x| Complex64::new(x, 0.0)));
        for i in 0..3 {
            row_sums[i] += ((fp[i].re - base[i].re) / h).abs();
        }
    }
    row_sums.iter().fold(0.0f64, |a, &b| a.max(b))
}

/// Default shadowing horizon `20/ε^{1/4}`, capped at `1e4`.
pub fn default_horizon(eps: f64) -> f64 {
    if eps <= 0.0 {
        100.0
    } else {
        (20.0 / eps.powf(0.25)).min(1e4)
    }
}

/// Integrates the reduced 3-D system started *on* the torus at grid point `i`
/// and compares the trajectory to the torus evaluation `v(φ0 + ωt)` over
/// `[0, T]`. Errors with a validation failure if the deviation leaves the
/// `10·ε^{1/3}` neighborhood predicted by the amplitude estimate.
pub fn shadow_check_ode(
    torus: &TorusSolution,
    spec: &SystemSpec,
    i: usize,
    horizon: Option<f64>,
) -> Result<DefectReport> {
    let sys = spec.build()?;
    let emb = torus.embedding[i].as_ref().ok_or_else(|| {
        Error::InvalidInput(format!("shadow_check_ode: grid point {i} was excluded"))
    })?;
    let t_end = horizon.unwrap_or_else(|| default_horizon(torus.eps));
    let field = sys.points[i].assemble(torus.eps);
    let omega = torus.omega[i].clone();
    let phi0 = vec![0.0; torus.n0];
    let v0 = torus.eval(i, &phi0).unwrap();
    let mut phi = vec![0.0; torus.n0];
    let traj = integrate_ode(
        |t, y, dy| {
            for (p, w) in phi.iter_mut().zip(&omega) {
                *p = w * t;
            }
            let v = [
                Complex64::new(y[0], 0.0),
                Complex64::new(y[1], 0.0),
                Complex64::new(y[2], 0.0),
            ];
            let rhs = field.eval(&phi, &v);
            for j in 0..3 {
                dy[j] = rhs[j].re;
            }
        },
        0.0,
        t_end,
        &v0,
        1e-12,
        1e-12,
        None,
    )?;
    let samples = 2000;
    let mut shadow = 0.0f64;
    let mut lip = 0.0f64;
    for s in 0..=samples {
        let t = t_end * s as f64 / samples as f64;
        let y = traj.eval(t);
        let phi_t: Vec<f64> = omega.iter().map(|w| w * t).collect();
        let v = [
            emb[0].eval(&phi_t).re,
            emb[1].eval(&phi_t).re,
            emb[2].eval(&phi_t).re,
        ];
        for j in 0..3 {
            shadow = shadow.max((y[j] - v[j]).abs());
        }
        if s % 32 == 0 {
            lip = lip.max(lipschitz_at(&field, &phi_t, &v));
        }
    }
    let defect = point_defect(emb, &field, &omega, 64);
    let report = DefectReport {
        defect,
        shadow_error: shadow,
        horizon: t_end,
        lipschitz: lip,
        gronwall_log_bound: lip * t_end + (defect.max(f64::MIN_POSITIVE) * t_end).ln(),
        transient_error: f64::NAN,
        plateau_error: f64::NAN,
    };
    let neighborhood = 10.0 * torus.eps.powf(1.0 / 3.0).max(f64::MIN_POSITIVE);
    if torus.eps > 0.0 && shadow > neighborhood {
        return Err(Error::ValidationFailure(format!(
            "ODE shadow deviation {shadow:.3e} exceeds 10·ε^(1/3) = {neighborhood:.3e}"
        )));
    }
    Ok(report)
}

/// Right-hand side of the delayed van der Pol oscillator in first-order form
/// `y = (x, ẋ)`, original (unrescaled) time, delay `τ0(a)`:
/// `ẍ + a(x² − 1)ẋ + x = x(t−τ0) + b1·x(t−τ0)³ + ε·g(ω′t, x, x(t−τ0))`.
pub fn vdp_dde_rhs(
    cfg: &VdpConfig,
    a: f64,
    eps: f64,
) -> impl Fn(f64, &[f64], &[f64], &mut [f64]) + '_ {
    let omega_prime = cfg.omega_prime.clone();
    let b1 = cfg.b1;
    move |t: f64, y: &[f64], yd: &[f64], dy: &mut [f64]| {
        let (x, xdot, xd) = (y[0], y[1], yd[0]);
        let mut g = 0.0;
        for term in &cfg.g_terms {
            let arg: f64 = term
                .k
                .iter()
                .zip(&omega_prime)
                .map(|(&k, w)| k as f64 * w * t)
                .sum();
            let osc = match term.basis {
                HarmonicBasis::Cos => arg.cos(),
                HarmonicBasis::Sin => arg.sin(),
            };
            g += term.amp * osc * x.powi(term.m as i32) * xd.powi(term.n as i32);
        }
        dy[0] = xdot;
        dy[1] = -a * (x * x - 1.0) * xdot - x + xd + b1 * xd.powi(3) + eps * g;
    }
}

/// Integrates the full delayed van der Pol oscillator by the method of steps.
/// `history(t)` must supply `(x, ẋ)` on `[−τ0, 0]`.
pub fn integrate_vdp_dde(
    cfg: &VdpConfig,
    a: f64,
    eps: f64,
    history: impl Fn(f64) -> Vec<f64>,
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory> {
    let (_, tau0) = critical_point(a)?;
    let rhs = vdp_dde_rhs(cfg, a, eps);
    integrate_dde(
        |t, y, yd, dy| rhs(t, y, yd, dy),
        tau0,
        history,
        0.0,
        t_end,
        rtol,
        atol,
        None,
    )
}

/// Shadows the full delay equation against the torus prediction
/// `x(t) = v1(ω′t) + v3(ω′t)` (the center-subspace reconstruction with the
/// hyperbolic component set to zero). The history on `[−τ0, 0]` is taken from
/// the torus, the full DDE is integrated over `[0, T]`, and the deviation is
/// split into a transient part (leading 20%) and a plateau (trailing 50%).
/// This is a soft check: the omitted hyperbolic component excites a decaying
/// transient, so no hard error is raised on the plateau level.
pub fn shadow_check_dde(
    torus: &TorusSolution,
    cfg: &VdpConfig,
    i: usize,
    horizon: Option<f64>,
) -> Result<DefectReport> {
    let emb = torus.embedding[i].as_ref().ok_or_else(|| {
        Error::InvalidInput(format!("shadow_check_dde: grid point {i} was excluded"))
    })?;
    let a = torus.grid.value(i);
    let t_end = horizon.unwrap_or_else(|| default_horizon(torus.eps));
    // x = v1 + v3 as a Fourier series in φ; φ = ω′t in original time, so the
    // time derivative is the directional derivative along ω′
    let x_series = emb[0].add(&emb[2]);
    let xdot_series = x_series.dphi_along(&cfg.omega_prime);
    let omp = cfg.omega_prime.clone();
    let predict = |t: f64| -> (f64, f64) {
        let phi: Vec<f64> = omp.iter().map(|w| w * t).collect();
        (x_series.eval(&phi).re, xdot_series.eval(&phi).re)
    };
    let traj = integrate_vdp_dde(
        cfg,
        a,
        torus.eps,
        |t| {
            let (x, xd) = predict(t);
            vec![x, xd]
        },
        t_end,
        1e-10,
        1e-12,
    )?;
    let samples = 2000;
    let (mut shadow, mut transient, mut plateau) = (0.0f64, 0.0f64, 0.0f64);
    for s in 0..=samples {
        let t = t_end * s as f64 / samples as f64;
        let y = traj.eval(t);
        let (xp, _) = predict(t);
        let d = (y[0] - xp).abs();
        shadow = shadow.max(d);
        if t <= 0.2 * t_end {
            transient = transient.max(d);
        }
        if t >= 0.5 * t_end {
            plateau = plateau.max(d);
        }
    }
    Ok(DefectReport {
        defect: f64::NAN,
        shadow_error: shadow,
        horizon: t_end,
        lipschitz: f64::NAN,
        gronwall_log_bound: f64::NAN,
        transient_error: transient,
        plateau_error: plateau,
    })
}

/// One row of an amplitude-scaling sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub converged: bool,
    /// `sup_{a, φ} |v_j|` per component over the surviving grid.
    pub sup_v: [f64; 3],
    pub sup_total: f64,
}

/// Runs the engine for each `ε` in `eps_list` on copies of `base` and records
/// the per-component amplitude suprema (evaluated on a 32^n0 φ-grid over all
/// validated parameter values). A failed run produces a non-converged row so
/// the report stays partial rather than aborting the sweep.
pub fn scaling_sweep(base: &SystemSpec, eps_list: &[f64], max_steps: usize) -> Vec<SweepRow> {
    eps_list
        .iter()
        .map(|&eps| {
            let mut spec = base.clone();
            spec.eps = eps;
            match solve_system(&spec, max_steps) {
                Ok(run) if run.converged => {
                    let sup = torus_amplitudes(&run.solution, 32);
                    SweepRow {
                        eps,
                        converged: true,
                        sup_v: sup,
                        sup_total: sup.iter().fold(0.0f64, |a, &b| a.max(b)),
                    }
                }
                _ => SweepRow {
                    eps,
                    converged: false,
                    sup_v: [f64::NAN; 3],
                    sup_total: f64::NAN,
                },
            }
        })
        .collect()
}

/// `sup_{a, φ} |v_j|` of the embedding per component, on an `m^n0` φ-grid.
pub fn torus_amplitudes(torus: &TorusSolution, m: usize) -> [f64; 3] {
    let mut sup = [0.0f64; 3];
    for emb in torus.embedding.iter().flatten() {
        for_each_phi(torus.n0, m, |phi| {
            for j in 0..3 {
                sup[j] = sup[j].max(emb[j].eval(phi).re.abs());
            }
        });
    }
    sup
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

// ---------------------------------------------------------------------------
// Spectral frequency measurement
// ---------------------------------------------------------------------------

/// Hann-windowed continuous-DFT magnitude of `samples` at angular frequency
/// `omega` (rad per time unit, sample spacing `dt`).
fn windowed_dft_mag(samples: &[f64], dt: f64, omega: f64) -> f64 {
    let n = samples.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, &x) in samples.iter().enumerate() {
        let wj = 0.5 * (1.0 - (std::f64::consts::TAU * j as f64 / n as f64).cos());
        let t = j as f64 * dt;
        acc += Complex64::from_polar(wj * x, -omega * t);
    }
    acc.norm()
}

/// Measures the `count` strongest oscillation frequencies of a real signal:
/// FFT with a Hann window for coarse peak location, then golden-section
/// refinement of the windowed continuous DFT magnitude around each peak.
/// Returns angular frequencies in ascending order.
pub fn dominant_frequencies(samples: &[f64], dt: f64, count: usize) -> Vec<f64> {
    let n = samples.len();
    assert!(n >= 16, "need a reasonable number of samples");
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<FftComplex<f64>> = samples
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let wj = 0.5 * (1.0 - (std::f64::consts::TAU * j as f64 / n as f64).cos());
            FftComplex::new(wj * (x - mean), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let mag: Vec<f64> = buf[..half].iter().map(|c| c.norm()).collect();
    let dom = std::f64::consts::TAU / (n as f64 * dt); // bin spacing in rad/time
    // local maxima, strongest first
    let mut peaks: Vec<(usize, f64)> = (2..half - 1)
        .filter(|&j| mag[j] > mag[j - 1] && mag[j] >= mag[j + 1])
        .map(|j| (j, mag[j]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut freqs: Vec<f64> = peaks
        .into_iter()
        .take(count)
        .map(|(j, _)| {
            // golden-section maximization of the continuous windowed DFT over
            // ± one bin around the coarse peak
            let (mut lo, mut hi) = ((j as f64 - 1.0) * dom, (j as f64 + 1.0) * dom);
            let gr = (5f64.sqrt() - 1.0) / 2.0;
            let (mut x1, mut x2) = (hi - gr * (hi - lo), lo + gr * (hi - lo));
            let (mut f1, mut f2) = (
                windowed_dft_mag(samples, dt, x1),
                windowed_dft_mag(samples, dt, x2),
            );
            for _ in 0..80 {
                if f1 < f2 {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + gr * (hi - lo);
                    f2 = windowed_dft_mag(samples, dt, x2);
                } else {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - gr * (hi - lo);
                    f1 = windowed_dft_mag(samples, dt, x1);
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    freqs.sort_by(f64::total_cmp);
    freqs
}
