//! Non-resonance machinery: Diophantine verification of the forcing frequency
//! and construction of the nested parameter sets `Π_ν` by excluding the zones
//! where a Melnikov divisor `|i⟨k,ω⟩ + m2 Ω2 + m3 Ω3|` drops below
//! `γ/|k|^{n0+1}`.
//!
//! Divisors are lower-bounded through their imaginary part
//! `⟨k,ω(a)⟩ + (m2−m3)·Im Ω2(a)` (with `Ω3 = conj Ω2` the real parts cancel up
//! to the `|m2+m3| ≤ 1` remnant), so excluding `{|Im| < thr}` is sound: it
//! removes a superset of the truly resonant set. Both the initial `Π1`
//! condition (`|⟨k,ω⟩ ± mΩ2| ≥ γ0/|k|^{n0+1}`, m = 1, 2, real `Ω2`) and the
//! iterative Melnikov condition reduce to the same coefficient family
//! `m2 − m3 ∈ {±1, ±2}`, so one zone-exclusion core serves both.

use crate::fourier::k_dot;
use crate::grid::{centered_diff, ParamGrid};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Finite union of disjoint closed intervals, kept sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    intervals: Vec<(f64, f64)>,
}

impl ParameterSet {
    pub fn empty() -> Self {
        Self { intervals: vec![] }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        assert!(hi >= lo);
        Self { intervals: vec![(lo, hi)] }
    }

    pub fn from_intervals(mut intervals: Vec<(f64, f64)>) -> Self {
        intervals.retain(|&(lo, hi)| hi > lo);
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in intervals.windows(2) {
            assert!(w[0].1 <= w[1].0, "intervals overlap");
        }
        Self { intervals }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, a: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= a && a <= hi)
    }

    /// Removes the open interval `(lo, hi)` from the set.
    pub fn subtract_interval(&mut self, lo: f64, hi: f64) {
        if hi <= lo {
            return;
        }
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        for &(a, b) in &self.intervals {
            if b <= lo || a >= hi {
                out.push((a, b));
                continue;
            }
            if a < lo {
                out.push((a, lo));
            }
            if b > hi {
                out.push((hi, b));
            }
        }
        self.intervals = out;
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.intervals.iter().all(|&(lo, hi)| {
            other
                .intervals
                .iter()
                .any(|&(a, b)| a <= lo && hi <= b)
        })
    }
}

/// Brute-force Diophantine certificate for a frequency vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiophantineCert {
    pub omega: Vec<f64>,
    pub gamma0: f64,
    pub iota: f64,
    pub kcheck: usize,
    /// `min_{0<|k|≤Kcheck} |⟨k,ω⟩|·|k|^ι`
    pub worst_ratio: f64,
    pub worst_k: Vec<i32>,
}

impl DiophantineCert {
    pub fn valid(&self) -> bool {
        self.worst_ratio >= self.gamma0
    }
}

/// Visits every `k ∈ Z^{n0}` with `0 < |k| ≤ K` whose first nonzero entry is
/// positive (the sign-reflected half contributes identical divisor magnitudes).
pub fn for_each_half_k(n0: usize, big_k: usize, mut f: impl FnMut(&[i32])) {
    let mut k = vec![0i32; n0];
    fn rec(k: &mut Vec<i32>, idx: usize, budget: i32, f: &mut impl FnMut(&[i32])) {
        if idx == k.len() {
            if k.iter().any(|&x| x != 0) {
                f(k);
            }
            return;
        }
        for v in -budget..=budget {
            // canonical half: first nonzero entry positive
            if k[..idx].iter().all(|&x| x == 0) && v < 0 {
                continue;
            }
            k[idx] = v;
            rec(k, idx + 1, budget - v.abs(), f);
            k[idx] = 0;
        }
    }
    rec(&mut k, 0, big_k as i32, &mut f);
}

pub fn check_diophantine(omega: &[f64], gamma0: f64, iota: f64, big_k: usize) -> DiophantineCert {
    assert!(big_k >= 1 && gamma0 > 0.0);
    let mut worst_ratio = f64::INFINITY;
    let mut worst_k = vec![0i32; omega.len()];
    for_each_half_k(omega.len(), big_k, |k| {
        let ord: usize = k.iter().map(|&x| x.unsigned_abs() as usize).sum();
        let ratio = k_dot(k, omega).abs() * (ord as f64).powf(iota);
        if ratio < worst_ratio {
            worst_ratio = ratio;
            worst_k = k.to_vec();
        }
    });
    DiophantineCert {
        omega: omega.to_vec(),
        gamma0,
        iota,
        kcheck: big_k,
        worst_ratio,
        worst_k,
    }
}

/// Grid-tabulated data entering the divisors: `ω(a)` (the forcing frequency
/// may depend on the parameter through a time rescaling) and `Im Ω2(a)`.
#[derive(Debug, Clone)]
pub struct ResonanceData {
    pub grid: ParamGrid,
    /// `ω` at each grid point; inner length `n0`.
    pub omega: Vec<Vec<f64>>,
    /// `Im Ω2` at each grid point (for the initial `Π1` condition this is the
    /// real normal frequency `Ω2` itself).
    pub om2_im: Vec<f64>,
}

impl ResonanceData {
    pub fn n0(&self) -> usize {
        self.omega[0].len()
    }

    fn h_values(&self, k: &[i32], c: i32) -> Vec<f64> {
        (0..self.grid.n)
            .map(|i| k_dot(k, &self.omega[i]) + c as f64 * self.om2_im[i])
            .collect()
    }

    /// Verifies `|∂_a Im Ω2| ≥ floor` with one sign throughout (monotonicity
    /// is checked, not assumed).
    pub fn check_derivative_floor(&self, floor: f64) -> Result<()> {
        let d = centered_diff(&self.om2_im, self.grid.spacing());
        for (i, di) in d.iter().enumerate() {
            if di.abs() < floor {
                return Err(Error::PreconditionFailure(format!(
                    "|∂_a Im Ω2| = {:.3e} < floor {floor:.3e} at grid point {i} (a = {:.6})",
                    di.abs(),
                    self.grid.value(i)
                )));
            }
        }
        if d.iter().any(|&x| x > 0.0) && d.iter().any(|&x| x < 0.0) {
            return Err(Error::PreconditionFailure(
                "∂_a Im Ω2 changes sign on the grid".into(),
            ));
        }
        Ok(())
    }
}

/// Boundary-location tolerance; zones are widened by one unit of it so the
/// returned set is certified non-resonant despite roundoff.
const ZONE_TOL: f64 = 1e-12;

/// Sub-intervals of `[grid]` where `|h| < thr` for the piecewise-linear
/// interpolant of the grid values `h`. Per cell the set is a single interval;
/// its endpoints are located by bisection on the interpolant.
fn zones_below(grid: &ParamGrid, h: &[f64], thr: f64) -> Vec<(f64, f64)> {
    let heval = |a: f64| -> f64 {
        let t = ((a - grid.a_min) / grid.spacing()).clamp(0.0, (grid.n - 1) as f64);
        let i = (t.floor() as usize).min(grid.n - 2);
        let frac = t - i as f64;
        h[i] + frac * (h[i + 1] - h[i])
    };
    // bisect g(a) = |h(a)| − thr between a point inside (< 0) and outside
    let bisect = |mut lo: f64, mut hi: f64| -> f64 {
        // invariant: sign(g(lo)) ≠ sign(g(hi)) or one side is on the boundary
        while hi - lo > ZONE_TOL {
            let mid = 0.5 * (lo + hi);
            if (heval(lo).abs() - thr).signum() == (heval(mid).abs() - thr).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut zones: Vec<(f64, f64)> = Vec::new();
    for i in 0..grid.n - 1 {
        let (a0, a1) = (grid.value(i), grid.value(i + 1));
        let (h0, h1) = (h[i], h[i + 1]);
        let inside0 = h0.abs() < thr;
        let inside1 = h1.abs() < thr;
        // candidate sub-interval of the cell where |h| < thr
        let dh = h1 - h0;
        let (mut lo, mut hi) = if dh.abs() < f64::MIN_POSITIVE {
            if inside0 {
                (a0, a1)
            } else {
                continue;
            }
        } else {
            // t where h = ∓thr
            let t_lo = (-thr - h0) / dh;
            let t_hi = (thr - h0) / dh;
            let (tl, th) = if t_lo <= t_hi { (t_lo, t_hi) } else { (t_hi, t_lo) };
            let tl = tl.max(0.0);
            let th = th.min(1.0);
            if th <= tl {
                continue;
            }
            (a0 + tl * (a1 - a0), a0 + th * (a1 - a0))
        };
        // refine interior boundaries by bisection against grid neighbours
        if !inside0 && lo > a0 {
            lo = bisect(a0, 0.5 * (lo + hi));
        }
        if !inside1 && hi < a1 {
            hi = bisect(0.5 * (lo + hi), a1);
        }
        // conservative widening
        lo -= ZONE_TOL;
        hi += ZONE_TOL;
        if let Some(last) = zones.last_mut() {
            if lo <= last.1 {
                last.1 = last.1.max(hi);
                continue;
            }
        }
        zones.push((lo, hi));
    }
    zones
}

/// Core exclusion: removes, for every `0 < |k| ≤ K` and every coefficient
/// `c ∈ coeffs`, the zones where `|⟨k,ω(a)⟩ + c·Ω2im(a)| < γ/|k|^{n0+1}`.
/// Returns the reduced set and the removed measure.
pub fn exclude_zones(
    set: &ParameterSet,
    data: &ResonanceData,
    gamma: f64,
    big_k: usize,
    coeffs: &[i32],
) -> (ParameterSet, f64) {
    let mut out = set.clone();
    if gamma <= 0.0 || big_k == 0 {
        return (out, 0.0);
    }
    let n0 = data.n0();
    let mut ks: Vec<Vec<i32>> = Vec::new();
    for_each_half_k(n0, big_k, |k| ks.push(k.to_vec()));
    // zone discovery is parallel over k; subtraction is a deterministic
    // sequential merge (k order fixed by the enumeration)
    let all_zones: Vec<Vec<(f64, f64)>> = ks
        .par_iter()
        .map(|k| {
            let ord: usize = k.iter().map(|&x| x.unsigned_abs() as usize).sum();
            let thr = gamma / (ord as f64).powi(n0 as i32 + 1);
            let mut zones = Vec::new();
            for &c in coeffs {
                let h = data.h_values(k, c);
                zones.extend(zones_below(&data.grid, &h, thr));
            }
            zones
        })
        .collect();
    let before = out.measure();
    for zones in all_zones {
        for (lo, hi) in zones {
            out.subtract_interval(lo, hi);
        }
    }
    let removed = before - out.measure();
    (out, removed)
}

/// Melnikov coefficient family: `m2 − m3` over `|m2+m3| ≤ 1`,
/// `1 ≤ |m2|+|m3| ≤ 2` — and also the initial `±m`, `m = 1, 2` family.
pub const MELNIKOV_COEFFS: [i32; 4] = [1, -1, 2, -2];

/// One Melnikov exclusion pass at level `γ`, order `K`. `deriv_floor`, when
/// given, is the required lower bound on `|∂_a Im Ω2|` (condition on the
/// normal frequency's transversality in `a`).
pub fn exclude_melnikov(
    set: &ParameterSet,
    data: &ResonanceData,
    gamma: f64,
    big_k: usize,
    deriv_floor: Option<f64>,
) -> Result<(ParameterSet, f64)> {
    if let Some(floor) = deriv_floor {
        data.check_derivative_floor(floor)?;
    }
    Ok(exclude_zones(set, data, gamma, big_k, &MELNIKOV_COEFFS))
}

/// The §-initial exclusion producing `Π1`: same zone machinery against the
/// real unperturbed normal frequency.
pub fn initial_exclusion(
    pi0: &ParameterSet,
    data: &ResonanceData,
    gamma0: f64,
    k0: usize,
) -> (ParameterSet, f64) {
    exclude_zones(pi0, data, gamma0, k0, &MELNIKOV_COEFFS)
}

/// Re-tests the defining inequalities on a `refine`-times-finer sampling of
/// the returned set (piecewise-linear in the tabulated data). Returns the
/// worst margin `min |h| − thr` (non-negative means certified).
pub fn recheck_pointwise(
    set: &ParameterSet,
    data: &ResonanceData,
    gamma: f64,
    big_k: usize,
    coeffs: &[i32],
    refine: usize,
) -> f64 {
    let n0 = data.n0();
    let g = &data.grid;
    let interp = |vals: &[f64], a: f64| -> f64 {
        let t = ((a - g.a_min) / g.spacing()).clamp(0.0, (g.n - 1) as f64);
        let i = (t.floor() as usize).min(g.n - 2);
        vals[i] + (t - i as f64) * (vals[i + 1] - vals[i])
    };
    let mut worst = f64::INFINITY;
    for_each_half_k(n0, big_k, |k| {
        let ord: usize = k.iter().map(|&x| x.unsigned_abs() as usize).sum();
        let thr = gamma / (ord as f64).powi(n0 as i32 + 1);
        for &c in coeffs {
            let h = data.h_values(k, c);
            for &(lo, hi) in set.intervals() {
                let m = ((hi - lo) / g.spacing() * refine as f64).ceil() as usize + 1;
                for j in 0..=m {
                    let a = lo + (hi - lo) * j as f64 / m as f64;
                    worst = worst.min(interp(&h, a).abs() - thr);
                }
            }
        }
    });
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_set_subtract_and_measure() {
        let mut s = ParameterSet::interval(0.0, 1.0);
        s.subtract_interval(0.2, 0.3);
        s.subtract_interval(0.25, 0.5);
        assert_eq!(s.intervals(), &[(0.0, 0.2), (0.5, 1.0)]);
        assert!((s.measure() - 0.7).abs() < 1e-15);
        assert!(s.contains(0.1) && !s.contains(0.4));
        assert!(s.is_subset_of(&ParameterSet::interval(0.0, 1.0)));
        assert!(!ParameterSet::interval(0.0, 1.0).is_subset_of(&s));
    }

    #[test]
    fn diophantine_golden_pair_passes() {
        let omega = [1.0, (5.0_f64.sqrt() - 1.0) / 2.0];
        let cert = check_diophantine(&omega, 0.2, 3.0, 50);
        assert!(cert.valid(), "worst ratio {}", cert.worst_ratio);
    }

    #[test]
    fn diophantine_rational_fails() {
        let cert = check_diophantine(&[1.0, 0.5], 1e-10, 3.0, 10);
        assert!(!cert.valid());
        assert_eq!(cert.worst_ratio, 0.0);
        // the resonance (1, −2) (canonical half) is the witness
        assert_eq!(cert.worst_k, vec![1, -2]);
    }

    #[test]
    fn diophantine_one_dim_trivial() {
        let cert = check_diophantine(&[1.0], 1.0, 2.0, 30);
        assert!(cert.valid());
        assert!((cert.worst_ratio - 1.0).abs() < 1e-15);
        assert_eq!(cert.worst_k, vec![1]);
    }

    /// Linear normal frequency: zones and widths are known in closed form.
    #[test]
    fn exclusion_zones_linear_closed_form() {
        // Ω2 = a, ω = (1): condition |k1 − c·a| < γ/|k1|² excludes around
        // a = k1/c with half-width γ/(|c||k1|²)
        let grid = ParamGrid::new(0.0, 4.0, 4097);
        let data = ResonanceData {
            grid,
            omega: vec![vec![1.0]; grid.n],
            om2_im: grid.values(),
        };
        let gamma = 0.01;
        let pi0 = ParameterSet::interval(0.0, 4.0);
        let (out, removed) = exclude_zones(&pi0, &data, gamma, 3, &[-1]);
        // c = −1: zeros at a = k1 for k1 = 1..3 (k1 in canonical half is ≥ 0
        // here since n0 = 1 → k1 ∈ {1,2,3}); widths 2γ/k1²
        let expect: f64 = (1..=3).map(|k1: i32| 2.0 * gamma / (k1.pow(2) as f64)).sum();
        assert!(
            (removed - expect).abs() < 1e-6,
            "removed {removed} expect {expect}"
        );
        for k1 in 1..=3 {
            assert!(!out.contains(k1 as f64));
        }
        // γ = 0 removes nothing
        let (same, rem0) = exclude_zones(&pi0, &data, 0.0, 3, &[-1]);
        assert_eq!(rem0, 0.0);
        assert_eq!(same, pi0);
    }

    #[test]
    fn exclusion_m2_matters() {
        // zero of ⟨k,ω⟩ − 2Ω2 at a = 0.5 for k = (1): only the m = 2
        // condition sees it
        let grid = ParamGrid::new(0.25, 0.75, 257);
        let data = ResonanceData {
            grid,
            omega: vec![vec![1.0]; grid.n],
            om2_im: grid.values(),
        };
        let pi0 = ParameterSet::interval(0.25, 0.75);
        let (only_m1, _) = exclude_zones(&pi0, &data, 1e-3, 1, &[1, -1]);
        assert!(only_m1.contains(0.5));
        let (with_m2, _) = exclude_zones(&pi0, &data, 1e-3, 1, &MELNIKOV_COEFFS);
        assert!(!with_m2.contains(0.5));
    }

    #[test]
    fn excluded_set_recertifies_at_finer_sampling() {
        let grid = ParamGrid::new(0.25, 1.25, 257);
        let data = ResonanceData {
            grid,
            omega: vec![vec![1.0, std::f64::consts::SQRT_2]; grid.n],
            om2_im: grid.values().iter().map(|a| 1.3 * a + 0.1).collect(),
        };
        let pi0 = ParameterSet::interval(0.25, 1.25);
        let (out, removed) = exclude_zones(&pi0, &data, 5e-3, 6, &MELNIKOV_COEFFS);
        assert!(removed > 0.0);
        assert!(out.is_subset_of(&pi0));
        let margin = recheck_pointwise(&out, &data, 5e-3, 6, &MELNIKOV_COEFFS, 10);
        assert!(margin >= 0.0, "margin {margin}");
    }

    #[test]
    fn derivative_floor_violation_detected() {
        let grid = ParamGrid::new(0.0, 1.0, 65);
        let data = ResonanceData {
            grid,
            omega: vec![vec![1.0]; grid.n],
            // Im Ω2 = (a − 1/2)²: derivative vanishes mid-grid
            om2_im: grid.values().iter().map(|a| (a - 0.5).powi(2)).collect(),
        };
        assert!(data.check_derivative_floor(1e-3).is_err());
    }
}
