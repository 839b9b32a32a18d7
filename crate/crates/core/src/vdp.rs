//! Center reduction of the delayed van der Pol oscillator
//!
//! ```text
//! ẍ + a(x² − 1)ẋ + x = f(x(t−τ)) + ε g(ω′t, x(t), x(t−τ))
//! ```
//!
//! at the zero-Hopf point `b = f′(0) = 1`, `τ = τ0(a)`, where the linearized
//! characteristic equation `λ² − aλ + 1 − e^{−τ0 λ} = 0` has a simple zero
//! root, a simple imaginary pair `±iω0`, and the remaining spectrum strictly
//! in the left half-plane. The three-dimensional center system produced here
//! (time rescaled by `τ0`, hyperbolic part dropped) is the input of the KAM
//! iteration; the discarded part is accounted for by direct integration of
//! the full delay equation during verification.

use crate::field::{MonomialIndex, PolySeries, QPPolyField};
use crate::fourier::FourierSeries;
use crate::grid::{centered_diff, ParamGrid};
use crate::integrate::gauss_legendre_on;
use crate::resonance::{check_diophantine, DiophantineCert};
use crate::sysspec::{add_real_harmonic, GridSystem, NumericsConfig, PointSystem, VdpConfig};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

/// `(ω0, τ0)` of the zero-Hopf point: `ω0 = √(2−a²)`, `τ0` on the arcsin
/// branch that switches at `a = 1`.
pub fn critical_point(a: f64) -> Result<(f64, f64)> {
    if a <= 0.0 || a >= 2f64.sqrt() {
        return Err(Error::InvalidInput(format!(
            "parameter a = {a} outside (0, √2)"
        )));
    }
    let omega0 = (2.0 - a * a).sqrt();
    let asn = (a * omega0).asin();
    let tau0 = if a > 1.0 {
        asn / omega0
    } else {
        (std::f64::consts::PI - asn) / omega0
    };
    Ok((omega0, tau0))
}

/// Characteristic function `h(λ) = λ² − aλ + 1 − e^{−τ0 λ}` (time-unscaled).
pub fn char_fn(a: f64, tau0: f64, lambda: Complex64) -> Complex64 {
    lambda * lambda - a * lambda + Complex64::new(1.0, 0.0) - (-tau0 * lambda).exp()
}

fn char_fn_deriv(a: f64, tau0: f64, lambda: Complex64) -> Complex64 {
    2.0 * lambda - Complex64::new(a, 0.0) + tau0 * (-tau0 * lambda).exp()
}

/// Characteristic roots near the imaginary axis and the spectral gap.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub a: f64,
    pub tau0: f64,
    /// All roots found in the search box, critical triple included.
    pub roots: Vec<Complex64>,
    /// `min −Re λ` over the non-critical roots in the box.
    pub gap: f64,
    /// Argument-principle zero count of the box contour.
    pub contour_count: usize,
}

/// Accumulated argument change of `h` along `z0 → z1`, sampled uniformly so
/// each step turns well below π (phase rate along the contour is bounded by
/// `τ0` plus the rational part's contribution, both O(1) here).
fn arg_change(a: f64, tau0: f64, z0: Complex64, z1: Complex64, steps: usize) -> f64 {
    let mut total = 0.0;
    let mut prev = char_fn(a, tau0, z0);
    for i in 1..=steps {
        let t = i as f64 / steps as f64;
        let z = z0 + (z1 - z0) * t;
        let h = char_fn(a, tau0, z);
        total += (h / prev).arg();
        prev = h;
    }
    total
}

/// Zero count inside the rectangle by the argument principle; the sampling
/// density is doubled until the winding number stabilizes.
pub fn contour_zero_count(a: f64, tau0: f64, re: (f64, f64), im: (f64, f64)) -> usize {
    let corners = [
        Complex64::new(re.0, im.0),
        Complex64::new(re.1, im.0),
        Complex64::new(re.1, im.1),
        Complex64::new(re.0, im.1),
        Complex64::new(re.0, im.0),
    ];
    let count_at = |per_unit: f64| -> i64 {
        let mut total = 0.0;
        for seg in corners.windows(2) {
            let steps = ((seg[1] - seg[0]).norm() * per_unit).ceil().max(16.0) as usize;
            total += arg_change(a, tau0, seg[0], seg[1], steps);
        }
        (total / (2.0 * std::f64::consts::PI)).round() as i64
    };
    let mut per_unit = 64.0;
    let mut count = count_at(per_unit);
    for _ in 0..6 {
        per_unit *= 2.0;
        let next = count_at(per_unit);
        if next == count {
            break;
        }
        count = next;
    }
    count.max(0) as usize
}

/// Finds the characteristic roots in `Re ∈ [re_lo, re_hi]`, `|Im| ≤ max_im`
/// by damped Newton from strip seeds, checks the count with the argument
/// principle, and asserts every non-critical root has `Re λ < 0`.
pub fn spectrum_gap(a: f64, re_lo: f64, re_hi: f64, max_im: f64) -> Result<SpectrumReport> {
    let (omega0, tau0) = critical_point(a)?;
    let mut roots: Vec<Complex64> = Vec::new();
    let mut push = |z: Complex64| {
        if z.re < re_lo - 1e-9 || z.re > re_hi + 1e-9 || z.im.abs() > max_im + 1e-9 {
            return;
        }
        if roots.iter().all(|r| (r - z).norm() > 1e-9) {
            roots.push(z);
        }
    };
    // strip seeds: one strip per 2π/τ0 of height, several Re offsets
    let strip = 2.0 * std::f64::consts::PI / tau0;
    let n_strips = ((max_im / strip).ceil() as usize + 2).min(40);
    let re_seeds = [0.5, 0.0, -1.0, -2.0, -4.0, -6.0, -8.0];
    let mut seeds = vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, omega0)];
    for j in 0..=n_strips {
        for frac in [0.25, 0.75] {
            let y = (j as f64 + frac) * strip;
            // asymptotic real part: e^{−τ0 x} ≈ |λ|² ⇒ x ≈ −(2/τ0) ln y
            let x_asym = -(2.0 / tau0) * y.max(2.0).ln();
            for &x in &re_seeds {
                seeds.push(Complex64::new(x, y));
                seeds.push(Complex64::new(x_asym + x * 0.25, y));
            }
        }
    }
    for seed in seeds {
        let mut z = seed;
        let mut ok = false;
        for _ in 0..80 {
            let h = char_fn(a, tau0, z);
            let dh = char_fn_deriv(a, tau0, z);
            if dh.norm() < 1e-14 {
                break;
            }
            let mut step = h / dh;
            // damping
            let mut t = 1.0;
            let mut znew = z - step;
            for _ in 0..20 {
                if char_fn(a, tau0, znew).norm() <= h.norm() || step.norm() < 1e-15 {
                    break;
                }
                t *= 0.5;
                step *= 0.5;
                znew = z - step;
            }
            let _ = t;
            z = znew;
            if step.norm() < 1e-13 * (1.0 + z.norm()) {
                ok = char_fn(a, tau0, z).norm() < 1e-10;
                break;
            }
        }
        if ok {
            push(z);
            push(z.conj());
        }
    }
    roots.sort_by(|p, q| {
        p.im.partial_cmp(&q.im).unwrap().then(p.re.partial_cmp(&q.re).unwrap())
    });
    let contour_count = contour_zero_count(a, tau0, (re_lo, re_hi), (-max_im, max_im));
    if contour_count != roots.len() {
        return Err(Error::ValidationFailure(format!(
            "argument-principle count {contour_count} disagrees with {} Newton roots in box at a = {a}",
            roots.len()
        )));
    }
    let is_critical = |z: &Complex64| {
        z.norm() < 1e-7 || (z - Complex64::new(0.0, omega0)).norm() < 1e-7
            || (z + Complex64::new(0.0, omega0)).norm() < 1e-7
    };
    let mut gap = f64::INFINITY;
    for z in &roots {
        if is_critical(z) {
            continue;
        }
        if z.re >= 0.0 {
            return Err(Error::HypothesisViolation(format!(
                "non-critical characteristic root {z} with non-negative real part at a = {a}"
            )));
        }
        gap = gap.min(-z.re);
    }
    Ok(SpectrumReport { a, tau0, roots, gap, contour_count })
}

/// Closed-form center/adjoint bases of the zero-Hopf triple.
#[derive(Debug, Clone)]
pub struct CenterBasis {
    pub a: f64,
    pub omega0: f64,
    pub tau0: f64,
    pub b2: f64,
    pub b3: f64,
    /// `b2` from the characteristic-equation-simplified form.
    pub b2_alt: f64,
    pub b3_alt: f64,
}

impl CenterBasis {
    /// Basis column `z_j(θ)`, `θ ∈ [−1, 0]`, `j ∈ {1,2,3}`.
    pub fn z(&self, j: usize, theta: f64) -> [f64; 2] {
        let p = self.tau0 * self.omega0 * theta;
        match j {
            1 => [1.0, 0.0],
            2 => [p.sin(), self.omega0 * p.cos()],
            3 => [p.cos(), -self.omega0 * p.sin()],
            _ => panic!("basis index out of range"),
        }
    }

    /// Adjoint row `ψ_j(s)`, `s ∈ [0, 1]`.
    pub fn psi(&self, j: usize, s: f64) -> [f64; 2] {
        let (a, t0, w0) = (self.a, self.tau0, self.omega0);
        let p = t0 * w0 * s;
        let nrm = 1.0 / (2.0 * (self.b2 * self.b2 + self.b3 * self.b3));
        match j {
            1 => [a / (a - t0), -1.0 / (a - t0)],
            2 => [
                nrm * (w0 * (t0 - a) * p.cos() + (4.0 - a * a - a * t0) * p.sin()),
                nrm * (-2.0 * self.b2 * p.sin() - 2.0 * self.b3 * p.cos()),
            ],
            3 => [
                nrm * ((4.0 - a * a - a * t0) * p.cos() - w0 * (t0 - a) * p.sin()),
                nrm * (2.0 * self.b3 * p.sin() - 2.0 * self.b2 * p.cos()),
            ],
            _ => panic!("basis index out of range"),
        }
    }

    /// Center block `U_Λ = diag-rotation (0, ±iτ0ω0)` in real form.
    pub fn u_lambda(&self) -> [[f64; 3]; 3] {
        let tw = self.tau0 * self.omega0;
        [[0.0, 0.0, 0.0], [0.0, 0.0, -tw], [0.0, tw, 0.0]]
    }

    /// `⟨ψ_i, z_j⟩ = ψ_i(0)·z_j(0) + ∫₀¹ ψ_i(s) B z_j(s−1) ds` by 64-node
    /// Gauss–Legendre (`B` routes only `τ0 · z_first` into `ψ_second`).
    pub fn duality(&self) -> [[f64; 3]; 3] {
        let (nodes, weights) = gauss_legendre_on(64, 0.0, 1.0);
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                let psi0 = self.psi(i + 1, 0.0);
                let z0 = self.z(j + 1, 0.0);
                let mut acc = psi0[0] * z0[0] + psi0[1] * z0[1];
                for (s, w) in nodes.iter().zip(&weights) {
                    let psi = self.psi(i + 1, *s);
                    let z = self.z(j + 1, s - 1.0);
                    acc += w * psi[1] * self.tau0 * z[0];
                }
                *entry = acc;
            }
        }
        m
    }

    /// Max entrywise deviation of `duality()` from the identity.
    pub fn duality_error(&self) -> f64 {
        let m = self.duality();
        let mut e = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                e = e.max((m[i][j] - want).abs());
            }
        }
        e
    }
}

/// Builds the closed-form basis data at parameter `a`.
pub fn build_basis(a: f64) -> Result<CenterBasis> {
    let (omega0, tau0) = critical_point(a)?;
    if (a - tau0).abs() < 1e-8 {
        return Err(Error::PreconditionFailure(format!(
            "degenerate adjoint normalization: |a − τ0| = {:.3e} at a = {a}",
            (a - tau0).abs()
        )));
    }
    let p = tau0 * omega0;
    let b2 = 0.5 * (a - tau0 * p.cos());
    let b3 = -omega0 + 0.5 * tau0 * p.sin();
    let b2_alt = 0.5 * (a + tau0 - tau0 * a * a);
    let b3_alt = 0.5 * omega0 * (a * tau0 - 2.0);
    Ok(CenterBasis { a, omega0, tau0, b2, b3, b2_alt, b3_alt })
}

/// Linear combination `c · (v1, v2, v3)` as a constant-in-φ polynomial.
fn linear_combo(n0: usize, kmax: usize, r: f64, c: [f64; 3]) -> PolySeries {
    let mut p = PolySeries::zero(n0, kmax, r);
    for (j, cj) in c.into_iter().enumerate() {
        if cj != 0.0 {
            p.add_scaled(&PolySeries::var(n0, kmax, r, j), Complex64::new(cj, 0.0));
        }
    }
    p
}

/// Reduces the configured oscillator to the grid-tabulated 3D center system:
/// `Ω1 = −τ0 b1/(a−τ0)`, `Ω2 = τ0 ω0`, cubic cross-coefficients
/// `d_j = −τ0 b_{3/2} b1/(b2²+b3²)`, and the forcing expanded through
/// `x(t) = v1+v3`, `x(t−τ) = v1 − v2 sin(τ0ω0) + v3 cos(τ0ω0)` (hyperbolic
/// coordinate set to zero). The frequency vector is `τ0(a)·ω′`.
pub fn reduce_to_center(
    cfg: &VdpConfig,
    grid: &ParamGrid,
    numerics: &NumericsConfig,
) -> Result<GridSystem> {
    let n0 = cfg.omega_prime.len();
    let (kmax, deg, r, s) = (numerics.kcap, numerics.degree, numerics.r0, numerics.s0);
    if cfg.b1 == 0.0 {
        return Err(Error::Config("b1 must be nonzero".into()));
    }
    let avals = grid.values();
    let results: Vec<Result<(Vec<f64>, PointSystem)>> = avals
        .par_iter()
        .map(|&a| {
            let basis = build_basis(a)?;
            let (omega0, tau0) = (basis.omega0, basis.tau0);
            let den = basis.b2 * basis.b2 + basis.b3 * basis.b3;
            // second entries of ψ_j(0): the projection weights of the scalar
            // forcing channel col(0, h)
            let p1 = -tau0 / (a - tau0);
            let p2 = -tau0 * basis.b3 / den;
            let p3 = -tau0 * basis.b2 / den;
            let phase = tau0 * omega0;
            let x = linear_combo(n0, kmax, r, [1.0, 0.0, 1.0]);
            let xd = linear_combo(n0, kmax, r, [1.0, -phase.sin(), phase.cos()]);
            let v1 = PolySeries::var(n0, kmax, r, 0);
            let v2 = PolySeries::var(n0, kmax, r, 1);
            let mut dropped = 0.0;
            // autonomous bracket minus its v1³ part (which goes to Ω1/d_j):
            // −a ω0 x² v2 + b1 (xd³ − v1³)
            let x2v2 = x.mul(&x, deg, s, &mut dropped).mul(&v2, deg, s, &mut dropped);
            let xd3 = xd.pow(3, deg, s, &mut dropped);
            let v13 = v1.pow(3, deg, s, &mut dropped);
            let mut bracket = x2v2.scaled(Complex64::new(-a * omega0, 0.0));
            bracket.add_scaled(&xd3.sub(&v13), Complex64::new(cfg.b1, 0.0));
            // forcing: Σ amp·cos/sin⟨k,φ⟩ · x^m xd^n, degree-truncated
            let mut gscalar = PolySeries::zero(n0, kmax, r);
            for term in &cfg.g_terms {
                let mut harm = FourierSeries::zero(n0, kmax, r);
                add_real_harmonic(&mut harm, &term.k, term.basis, term.amp);
                let mut p = PolySeries::monomial(
                    n0,
                    kmax,
                    r,
                    MonomialIndex::new(0, 0, 0),
                    harm,
                );
                if term.m > 0 {
                    p = p.mul(&x.pow(term.m, deg, s, &mut dropped), deg, s, &mut dropped);
                }
                if term.n > 0 {
                    p = p.mul(&xd.pow(term.n, deg, s, &mut dropped), deg, s, &mut dropped);
                }
                gscalar.add_scaled(&p, Complex64::new(1.0, 0.0));
            }
            let mut f_field = QPPolyField::zero(n0, kmax, deg, r, s);
            let mut g_field = QPPolyField::zero(n0, kmax, deg, r, s);
            for (j, pj) in [p1, p2, p3].into_iter().enumerate() {
                f_field.comps[j] = bracket.scaled(Complex64::new(pj, 0.0));
                g_field.comps[j] = gscalar.scaled(Complex64::new(pj, 0.0));
            }
            let point = PointSystem {
                omega1: p1 * cfg.b1,
                omega2: tau0 * omega0,
                d1: p2 * cfg.b1,
                d2: p3 * cfg.b1,
                f: f_field,
                g: g_field,
            };
            let omega: Vec<f64> = cfg.omega_prime.iter().map(|w| tau0 * w).collect();
            Ok((omega, point))
        })
        .collect();
    let mut omega = Vec::with_capacity(grid.n);
    let mut points = Vec::with_capacity(grid.n);
    for r in results {
        let (o, p) = r?;
        omega.push(o);
        points.push(p);
    }
    Ok(GridSystem {
        grid: *grid,
        n0,
        kmax,
        degree: deg,
        r,
        s,
        omega,
        points,
    })
}

/// Per-hypothesis pass/fail data for a configured oscillator.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HypothesisReport {
    pub b1_nonzero: bool,
    /// `min |a − τ0|` over the grid (adjoint normalization).
    pub min_denominator: f64,
    /// `min |∂_a (τ0 ω0)|` — the twist of the normal frequency.
    pub min_omega2_deriv: f64,
    pub diophantine: DiophantineCert,
    pub diophantine_ok: bool,
    /// At least one of the averages `ĝ00(0)`, `ĝ10(0)+ĝ01(0)` non-vanishing.
    pub forcing_average_ok: bool,
    pub all_pass: bool,
}

/// Checks the standing hypotheses on the grid and reports per-item results.
pub fn hypothesis_report(
    cfg: &VdpConfig,
    grid: &ParamGrid,
    gamma0: f64,
    kcheck: usize,
) -> Result<HypothesisReport> {
    let avals = grid.values();
    let mut min_den = f64::INFINITY;
    let mut om2 = Vec::with_capacity(grid.n);
    for &a in &avals {
        let (omega0, tau0) = critical_point(a)?;
        min_den = min_den.min((a - tau0).abs());
        om2.push(tau0 * omega0);
    }
    let dom2 = centered_diff(&om2, grid.spacing());
    let min_d = dom2.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let n0 = cfg.omega_prime.len();
    let iota = n0 + 1;
    let cert = check_diophantine(&cfg.omega_prime, gamma0, iota as f64, kcheck);
    // averages of g00 and g10 + g01 at φ-mean: only the k = 0 cosine terms
    let avg = |m: u32, n: u32| -> f64 {
        cfg.g_terms
            .iter()
            .filter(|t| {
                t.m == m
                    && t.n == n
                    && t.k.iter().all(|&x| x == 0)
                    && t.basis == crate::sysspec::HarmonicBasis::Cos
            })
            .map(|t| t.amp)
            .sum()
    };
    let forcing_ok = avg(0, 0).abs() > 1e-12 || (avg(1, 0) + avg(0, 1)).abs() > 1e-12;
    let report = HypothesisReport {
        b1_nonzero: cfg.b1 != 0.0,
        min_denominator: min_den,
        min_omega2_deriv: min_d,
        diophantine_ok: cert.valid(),
        diophantine: cert,
        forcing_average_ok: forcing_ok,
        all_pass: false,
    };
    let all = report.b1_nonzero
        && report.min_denominator > 1e-8
        && report.min_omega2_deriv > 1e-8
        && report.diophantine_ok
        && report.forcing_average_ok;
    Ok(HypothesisReport { all_pass: all, ..report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::complexify_field;
    use crate::sysspec::ForcingTerm;

    #[test]
    fn critical_point_identities() {
        // a = 1: ω0 = 1, τ0 = π − arcsin(1) = π/2
        let (w0, t0) = critical_point(1.0).unwrap();
        assert!((w0 - 1.0).abs() < 1e-15);
        assert!((t0 - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        // a = 1.2 on the other branch
        let (w0, t0) = critical_point(1.2).unwrap();
        assert!((w0 - 0.56f64.sqrt()).abs() < 1e-15);
        assert!((t0 - (1.2 * w0).asin() / w0).abs() < 1e-15);
        assert!(critical_point(1.5).is_err());
        assert!(critical_point(0.0).is_err());
    }

    #[test]
    fn characteristic_residual_across_grid() {
        let grid = ParamGrid::new(0.25, 1.25, 64);
        for a in grid.values() {
            let (w0, t0) = critical_point(a).unwrap();
            assert!(char_fn(a, t0, Complex64::new(0.0, 0.0)).norm() < 1e-12);
            assert!(char_fn(a, t0, Complex64::new(0.0, w0)).norm() < 1e-12);
            assert!(char_fn(a, t0, Complex64::new(0.0, -w0)).norm() < 1e-12);
        }
    }

    #[test]
    fn b2_b3_both_forms() {
        for a in ParamGrid::new(0.25, 1.25, 64).values() {
            let b = build_basis(a).unwrap();
            assert!((b.b2 - b.b2_alt).abs() < 1e-12, "a = {a}");
            assert!((b.b3 - b.b3_alt).abs() < 1e-12, "a = {a}");
        }
        // a = 1: b2 = ½(1 + π/2 − π/2) = 0.5, b3 = (π/2 − 2)/2
        let b = build_basis(1.0).unwrap();
        assert!((b.b2 - 0.5).abs() < 1e-14);
        assert!((b.b3 - (std::f64::consts::FRAC_PI_2 - 2.0) / 2.0).abs() < 1e-14);
        assert!((b.b3 + 0.21460).abs() < 1e-5);
    }

    #[test]
    fn duality_is_identity() {
        for a in [0.25, 0.5, 0.75, 1.0, 1.1, 1.25] {
            let b = build_basis(a).unwrap();
            assert!(b.duality_error() < 1e-10, "a = {a}: {}", b.duality_error());
        }
    }

    #[test]
    fn spectral_gap_in_box() {
        let rep = spectrum_gap(1.0, -10.0, 1.0, 40.0).unwrap();
        assert!(rep.gap > 0.0);
        assert!(rep.roots.len() >= 3);
        // count includes the critical triple
        assert_eq!(rep.contour_count, rep.roots.len());
    }

    #[test]
    fn reduced_coefficients() {
        // b1 = 1, a = 1: Ω1 = −(π/2)/(1 − π/2) ≈ 2.7519
        let cfg = VdpConfig::default_desk();
        let grid = ParamGrid::new(1.0, 1.25, 3);
        let gs = reduce_to_center(&cfg, &grid, &NumericsConfig::default()).unwrap();
        let p = &gs.points[0];
        let t0 = std::f64::consts::FRAC_PI_2;
        assert!((p.omega1 - (-t0 / (1.0 - t0))).abs() < 1e-12);
        assert!((p.omega1 - 2.7519).abs() < 1e-4);
        assert!((p.omega2 - t0).abs() < 1e-12);
        // frequency vector is τ0·ω′
        assert!((gs.omega[0][0] - t0).abs() < 1e-12);
        // constant forcing channel: ĝ1(k=0) at v=0 equals p1·(amp of the
        // constant term) = −τ0/(a−τ0)
        let g1_const = p.g.comps[0]
            .coeff(&MonomialIndex::new(0, 0, 0))
            .get(&[0, 0]);
        assert!((g1_const.re - (-t0 / (1.0 - t0))).abs() < 1e-12);
        assert!(g1_const.im.abs() < 1e-15);
    }

    #[test]
    fn forcing_linear_term_routing() {
        // g = x(t): v1 and v3 coefficients of g1 both −τ0/(a−τ0)
        let cfg = VdpConfig {
            b1: 1.0,
            g_terms: vec![ForcingTerm {
                m: 1,
                n: 0,
                k: vec![0, 0],
                basis: crate::sysspec::HarmonicBasis::Cos,
                amp: 1.0,
            }],
            omega_prime: vec![1.0, (5f64.sqrt() - 1.0) / 2.0],
        };
        let grid = ParamGrid::new(1.0, 1.25, 3);
        let gs = reduce_to_center(&cfg, &grid, &NumericsConfig::default()).unwrap();
        let p1 = -gs.points[0].omega2 / (1.0 - std::f64::consts::FRAC_PI_2);
        // Ω2 = τ0ω0 = τ0 here (ω0 = 1), so p1 = −τ0/(a−τ0)
        for l in [MonomialIndex::new(1, 0, 0), MonomialIndex::new(0, 0, 1)] {
            let c = gs.points[0].g.comps[0].coeff(&l).get(&[0, 0]);
            assert!((c.re - p1).abs() < 1e-12, "monomial {l:?}");
        }
        // no v2 term in x(t)
        assert!(gs.points[0].g.comps[0]
            .coeff(&MonomialIndex::new(0, 1, 0))
            .is_zero());
    }

    #[test]
    fn reduced_field_pointwise_oracle() {
        let cfg = VdpConfig::default_desk();
        let grid = ParamGrid::new(0.25, 1.25, 5);
        let gs = reduce_to_center(&cfg, &grid, &NumericsConfig::default()).unwrap();
        for (i, a) in grid.values().into_iter().enumerate() {
            let b = build_basis(a).unwrap();
            let (w0, t0) = (b.omega0, b.tau0);
            let den = b.b2 * b.b2 + b.b3 * b.b3;
            let pj = [-t0 / (a - t0), -t0 * b.b3 / den, -t0 * b.b2 / den];
            let phase = t0 * w0;
            let (v1, v2, v3) = (0.11, -0.07, 0.05);
            let phi = [0.9f64, 0.3];
            let x = v1 + v3;
            let xd = v1 - v2 * phase.sin() + v3 * phase.cos();
            let bracket = -a * w0 * x * x * v2 + cfg.b1 * (xd.powi(3) - v1.powi(3));
            let gval = 1.0 + phi[0].cos();
            let w = [
                Complex64::new(v1, 0.0),
                Complex64::new(v2, 0.0),
                Complex64::new(v3, 0.0),
            ];
            let fv = gs.points[i].f.eval(&phi, &w);
            let gv = gs.points[i].g.eval(&phi, &w);
            for j in 0..3 {
                assert!((fv[j].re - pj[j] * bracket).abs() < 1e-13, "f comp {j} a={a}");
                assert!((gv[j].re - pj[j] * gval).abs() < 1e-13, "g comp {j} a={a}");
                assert!(fv[j].im.abs() < 1e-15 && gv[j].im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reduced_autonomous_part_is_higher_degree() {
        let cfg = VdpConfig::default_desk();
        let grid = ParamGrid::new(0.25, 1.25, 5);
        let gs = reduce_to_center(&cfg, &grid, &NumericsConfig::default()).unwrap();
        for p in &gs.points {
            for comp in &p.f.comps {
                for (l, series) in comp.iter() {
                    if !series.is_zero() {
                        assert!(l.is_higher(), "monomial {l:?} in autonomous part");
                    }
                }
            }
        }
    }

    #[test]
    fn complexified_reduction_is_real() {
        let cfg = VdpConfig::default_desk();
        let grid = ParamGrid::new(0.25, 1.25, 3);
        let gs = reduce_to_center(&cfg, &grid, &NumericsConfig::default()).unwrap();
        for p in &gs.points {
            let field = p.assemble(1e-4);
            let h = complexify_field(&field);
            assert!(h.reality_violation() < 1e-12);
        }
    }

    #[test]
    fn hypothesis_report_defaults_pass() {
        let cfg = VdpConfig::default_desk();
        let grid = ParamGrid::new(0.25, 1.25, 65);
        let rep = hypothesis_report(&cfg, &grid, 0.2, 40).unwrap();
        assert!(rep.all_pass, "{rep:?}");
        // b1 = 0 fails
        let mut bad = cfg.clone();
        bad.b1 = 0.0;
        let rep = hypothesis_report(&bad, &grid, 0.2, 40).unwrap();
        assert!(!rep.all_pass && !rep.b1_nonzero);
        // rational frequency fails the Diophantine certificate
        let mut res = cfg.clone();
        res.omega_prime = vec![1.0, 0.5];
        let rep = hypothesis_report(&res, &grid, 0.2, 40).unwrap();
        assert!(!rep.diophantine_ok);
    }
}
