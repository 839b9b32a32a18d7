//! Problem-instance model: a JSON-serializable description of the forced
//! three-dimensional system
//!
//! ```text
//! v̇1 = Ω1(a) v1³            + f1(v;a) + ε g1(φ,v;a)
//! v̇2 = −Ω2(a) v3 + d1(a)v1³ + f2(v;a) + ε g2(φ,v;a)
//! v̇3 =  Ω2(a) v2 + d2(a)v1³ + f3(v;a) + ε g3(φ,v;a)
//! ```
//!
//! with `φ = ωt`, either written out term by term (`model: explicit`) or
//! produced by the built-in delayed van der Pol center reduction
//! (`model: vdp`). `build` tabulates everything on the parameter grid and
//! hands the engine real per-point fields.

use crate::field::{MonomialIndex, PolySeries, QPPolyField};
use crate::fourier::FourierSeries;
use crate::grid::ParamGrid;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Scalar-valued coefficient that may depend on the parameter `a`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CoeffSpec {
    /// Constant in `a`.
    Scalar(f64),
    /// Polynomial in `a`: `poly[0] + poly[1] a + …`.
    Poly { poly: Vec<f64> },
    /// Tabulated per grid point (length must match the grid).
    Grid { grid: Vec<f64> },
}

impl CoeffSpec {
    pub fn eval(&self, a: f64, grid_index: usize, grid_n: usize) -> Result<f64> {
        match self {
            CoeffSpec::Scalar(c) => Ok(*c),
            CoeffSpec::Poly { poly } => {
                Ok(poly.iter().rev().fold(0.0, |acc, c| acc * a + c))
            }
            CoeffSpec::Grid { grid } => {
                if grid.len() != grid_n {
                    return Err(Error::Config(format!(
                        "grid-tabulated coefficient has {} entries, grid has {grid_n}",
                        grid.len()
                    )));
                }
                Ok(grid[grid_index])
            }
        }
    }
}

/// Angular basis function attached to a field term.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum HarmonicBasis {
    /// `cos⟨k,φ⟩` (a constant when `k = 0`).
    Cos,
    /// `sin⟨k,φ⟩`.
    Sin,
}

/// One real term `amp(a) · cos/sin⟨k,φ⟩ · v1^{l1} v2^{l2} v3^{l3}` of a field
/// component.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldTerm {
    /// Component index, 1-based (1 = v1-equation).
    pub component: usize,
    /// Monomial exponents `(l1, l2, l3)` in `(v1, v2, v3)`.
    pub l: [u32; 3],
    /// Fourier mode; length `n0`.
    pub k: Vec<i32>,
    #[serde(default = "default_cos")]
    pub basis: HarmonicBasis,
    pub amp: CoeffSpec,
}

fn default_cos() -> HarmonicBasis {
    HarmonicBasis::Cos
}

/// Adds `amp · cos/sin⟨k,φ⟩` to a real Fourier series in exponential form.
pub fn add_real_harmonic(
    series: &mut FourierSeries,
    k: &[i32],
    basis: HarmonicBasis,
    amp: f64,
) {
    if k.iter().all(|&x| x == 0) {
        match basis {
            HarmonicBasis::Cos => {
                let c = series.get(k) + Complex64::new(amp, 0.0);
                series.set(k.to_vec(), c);
            }
            HarmonicBasis::Sin => {}
        }
        return;
    }
    let kneg: Vec<i32> = k.iter().map(|x| -x).collect();
    let (cp, cm) = match basis {
        HarmonicBasis::Cos => (
            Complex64::new(amp / 2.0, 0.0),
            Complex64::new(amp / 2.0, 0.0),
        ),
        HarmonicBasis::Sin => (
            Complex64::new(0.0, -amp / 2.0),
            Complex64::new(0.0, amp / 2.0),
        ),
    };
    let a = series.get(k) + cp;
    series.set(k.to_vec(), a);
    let b = series.get(&kneg) + cm;
    series.set(kneg, b);
}

/// One term `g_{mn}(φ) x(t)^m x(t−τ)^n` of the van der Pol forcing expansion,
/// with `g_{mn}` a single real harmonic.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ForcingTerm {
    pub m: u32,
    pub n: u32,
    pub k: Vec<i32>,
    #[serde(default = "default_cos")]
    pub basis: HarmonicBasis,
    pub amp: f64,
}

/// Configuration of the delayed van der Pol reduction.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VdpConfig {
    /// Cubic coefficient of the delayed feedback `f(x) = x + b1 x³`.
    pub b1: f64,
    /// Forcing expansion `g = Σ g_{mn}(φ) x^m x(t−τ)^n`.
    pub g_terms: Vec<ForcingTerm>,
    /// Base forcing frequency `ω′` (the system runs at `ω = τ0(a)·ω′`).
    pub omega_prime: Vec<f64>,
}

impl VdpConfig {
    /// `b1 = 1`, `g = 1 + cos φ1`, golden-pair frequency.
    pub fn default_desk() -> Self {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        VdpConfig {
            b1: 1.0,
            g_terms: vec![
                ForcingTerm { m: 0, n: 0, k: vec![0, 0], basis: HarmonicBasis::Cos, amp: 1.0 },
                ForcingTerm { m: 0, n: 0, k: vec![1, 0], basis: HarmonicBasis::Cos, amp: 1.0 },
            ],
            omega_prime: vec![1.0, golden],
        }
    }
}

/// Model payload: explicit term tables or the built-in reduction.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelSpec {
    Explicit {
        /// Frequency `ω` (fixed across the grid).
        omega: Vec<f64>,
        omega1: CoeffSpec,
        omega2: CoeffSpec,
        d1: CoeffSpec,
        d2: CoeffSpec,
        #[serde(default)]
        f: Vec<FieldTerm>,
        #[serde(default)]
        g: Vec<FieldTerm>,
    },
    Vdp(VdpConfig),
}

/// Numerical knobs with desk-scale defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct NumericsConfig {
    /// Total-degree cutoff for polynomial truncation.
    pub degree: u32,
    /// Hard cap on Fourier truncation orders.
    pub kcap: usize,
    /// Analyticity width of the angle domain.
    pub r0: f64,
    /// Radius of the `w`-polydisc.
    pub s0: f64,
    /// Residual tolerance / iteration stop.
    pub tol: f64,
    /// Skip the `ε0 ≤ γ0^p` configuration gate (exploratory runs).
    pub case_override: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            degree: 6,
            kcap: 512,
            r0: 1.0,
            s0: 1.0,
            tol: 1e-12,
            case_override: false,
        }
    }
}

/// Full problem instance (the JSON the CLI consumes).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemSpec {
    pub n0: usize,
    pub grid: ParamGrid,
    pub eps: f64,
    pub gamma0: f64,
    pub model: ModelSpec,
    #[serde(default)]
    pub numerics: NumericsConfig,
}

/// Per-grid-point real system data (fields in the original `v` variables).
#[derive(Debug, Clone)]
pub struct PointSystem {
    pub omega1: f64,
    pub omega2: f64,
    pub d1: f64,
    pub d2: f64,
    /// Autonomous higher-degree field (all three components).
    pub f: QPPolyField,
    /// Forcing field (enters multiplied by `ε`).
    pub g: QPPolyField,
}

impl PointSystem {
    /// Full real right-hand side at forcing strength `eps`.
    pub fn assemble(&self, eps: f64) -> QPPolyField {
        let (n0, kmax, d, r, s) =
            (self.f.n0, self.f.kmax, self.f.d, self.f.r, self.f.s);
        let mut x = QPPolyField::zero(n0, kmax, d, r, s);
        let cubic = MonomialIndex::new(3, 0, 0);
        let one = |c: f64| FourierSeries::constant(n0, kmax, r, Complex64::new(c, 0.0));
        x.comps[0].set_term(cubic, one(self.omega1));
        x.comps[1].set_term(MonomialIndex::new(0, 0, 1), one(-self.omega2));
        x.comps[1].add_scaled(
            &PolySeries::monomial(n0, kmax, r, cubic, one(self.d1)),
            Complex64::new(1.0, 0.0),
        );
        x.comps[2].set_term(MonomialIndex::new(0, 1, 0), one(self.omega2));
        x.comps[2].add_scaled(
            &PolySeries::monomial(n0, kmax, r, cubic, one(self.d2)),
            Complex64::new(1.0, 0.0),
        );
        x.add_scaled(&self.f, Complex64::new(1.0, 0.0));
        x.add_scaled(&self.g, Complex64::new(eps, 0.0));
        x
    }
}

/// Grid-tabulated system: what `SystemSpec::build` produces and the engine
/// consumes.
#[derive(Debug, Clone)]
pub struct GridSystem {
    pub grid: ParamGrid,
    pub n0: usize,
    pub kmax: usize,
    pub degree: u32,
    pub r: f64,
    pub s: f64,
    /// Frequency vector per grid point.
    pub omega: Vec<Vec<f64>>,
    pub points: Vec<PointSystem>,
}

impl SystemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SystemSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 {
            return Err(Error::Config("n0 must be positive".into()));
        }
        if self.eps < 0.0 {
            return Err(Error::Config("eps must be non-negative".into()));
        }
        if self.gamma0 <= 0.0 {
            return Err(Error::Config("gamma0 must be positive".into()));
        }
        if self.grid.n < 3 {
            return Err(Error::Config("parameter grid needs at least 3 points".into()));
        }
        match &self.model {
            ModelSpec::Explicit { omega, f, g, .. } => {
                if omega.len() != self.n0 {
                    return Err(Error::Config(format!(
                        "omega has {} entries, n0 = {}",
                        omega.len(),
                        self.n0
                    )));
                }
                for t in f.iter().chain(g.iter()) {
                    if t.component < 1 || t.component > 3 {
                        return Err(Error::Config(format!(
                            "field term component {} out of range 1..=3",
                            t.component
                        )));
                    }
                    if t.k.len() != self.n0 {
                        return Err(Error::Config(format!(
                            "field term mode {:?} has wrong dimension (n0 = {})",
                            t.k, self.n0
                        )));
                    }
                    if t.l.iter().sum::<u32>() > self.numerics.degree {
                        return Err(Error::Config(format!(
                            "field term degree {:?} exceeds cutoff {}",
                            t.l, self.numerics.degree
                        )));
                    }
                }
            }
            ModelSpec::Vdp(cfg) => {
                if cfg.omega_prime.len() != self.n0 {
                    return Err(Error::Config(format!(
                        "omega_prime has {} entries, n0 = {}",
                        cfg.omega_prime.len(),
                        self.n0
                    )));
                }
                if cfg.b1 == 0.0 {
                    return Err(Error::Config("b1 must be nonzero".into()));
                }
                for t in &cfg.g_terms {
                    if t.k.len() != self.n0 {
                        return Err(Error::Config(format!(
                            "forcing mode {:?} has wrong dimension (n0 = {})",
                            t.k, self.n0
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Tabulates the real per-grid-point fields.
    pub fn build(&self) -> Result<GridSystem> {
        self.validate()?;
        match &self.model {
            ModelSpec::Explicit { omega, omega1, omega2, d1, d2, f, g } => {
                let nm = &self.numerics;
                let n = self.grid.n;
                let avals = self.grid.values();
                let mut points = Vec::with_capacity(n);
                for (i, &a) in avals.iter().enumerate() {
                    let mut fp = QPPolyField::zero(self.n0, nm.kcap, nm.degree, nm.r0, nm.s0);
                    let mut gp = fp.clone();
                    for (terms, field) in [(f, &mut fp), (g, &mut gp)] {
                        for t in terms {
                            let amp = t.amp.eval(a, i, n)?;
                            let l = MonomialIndex::new(t.l[0], t.l[1], t.l[2]);
                            let comp = &mut field.comps[t.component - 1];
                            let mut series = comp.coeff(&l);
                            add_real_harmonic(&mut series, &t.k, t.basis, amp);
                            comp.set_term(l, series);
                        }
                    }
                    points.push(PointSystem {
                        omega1: omega1.eval(a, i, n)?,
                        omega2: omega2.eval(a, i, n)?,
                        d1: d1.eval(a, i, n)?,
                        d2: d2.eval(a, i, n)?,
                        f: fp,
                        g: gp,
                    });
                }
                Ok(GridSystem {
                    grid: self.grid,
                    n0: self.n0,
                    kmax: nm.kcap,
                    degree: nm.degree,
                    r: nm.r0,
                    s: nm.s0,
                    omega: vec![omega.clone(); n],
                    points,
                })
            }
            ModelSpec::Vdp(cfg) => crate::vdp::reduce_to_center(cfg, &self.grid, &self.numerics),
        }
    }
}

/// The default delayed van der Pol instance used by tests and the CLI.
pub fn default_vdp_spec(eps: f64) -> SystemSpec {
    SystemSpec {
        n0: 2,
        grid: ParamGrid::new(0.25, 1.25, 257),
        eps,
        gamma0: 0.2,
        model: ModelSpec::Vdp(VdpConfig::default_desk()),
        numerics: NumericsConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip() {
        let spec = default_vdp_spec(1e-6);
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back = SystemSpec::from_json(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn coeff_spec_forms() {
        let s = CoeffSpec::Scalar(2.0);
        assert_eq!(s.eval(0.7, 0, 5).unwrap(), 2.0);
        let p = CoeffSpec::Poly { poly: vec![1.0, -2.0, 3.0] };
        assert!((p.eval(0.5, 0, 5).unwrap() - (1.0 - 1.0 + 0.75)).abs() < 1e-15);
        let g = CoeffSpec::Grid { grid: vec![1.0, 2.0, 3.0] };
        assert_eq!(g.eval(0.0, 1, 3).unwrap(), 2.0);
        assert!(g.eval(0.0, 1, 5).is_err());
    }

    #[test]
    fn explicit_model_assembles_pointwise() {
        let spec = SystemSpec {
            n0: 2,
            grid: ParamGrid::new(0.0, 1.0, 3),
            eps: 1e-3,
            gamma0: 0.1,
            model: ModelSpec::Explicit {
                omega: vec![1.0, 0.5f64.sqrt()],
                omega1: CoeffSpec::Scalar(1.0),
                omega2: CoeffSpec::Poly { poly: vec![1.0, 1.0] },
                d1: CoeffSpec::Scalar(0.2),
                d2: CoeffSpec::Scalar(-0.1),
                f: vec![FieldTerm {
                    component: 2,
                    l: [1, 1, 0],
                    k: vec![0, 0],
                    basis: HarmonicBasis::Cos,
                    amp: CoeffSpec::Scalar(0.5),
                }],
                g: vec![FieldTerm {
                    component: 1,
                    l: [0, 0, 0],
                    k: vec![1, 0],
                    basis: HarmonicBasis::Sin,
                    amp: CoeffSpec::Scalar(2.0),
                }],
            },
            numerics: NumericsConfig::default(),
        };
        let gs = spec.build().unwrap();
        assert_eq!(gs.points.len(), 3);
        // a = 0.5 (middle point): Ω2 = 1.5
        assert!((gs.points[1].omega2 - 1.5).abs() < 1e-15);
        // pointwise oracle of the assembled RHS at a test state
        let p = &gs.points[1];
        let x = p.assemble(spec.eps);
        let phi = [0.3, 1.1];
        let v = [
            Complex64::new(0.2, 0.0),
            Complex64::new(-0.1, 0.0),
            Complex64::new(0.4, 0.0),
        ];
        let got = x.eval(&phi, &v);
        let want = [
            0.2f64.powi(3) + 1e-3 * 2.0 * (0.3f64).sin(),
            -1.5 * 0.4 + 0.2 * 0.2f64.powi(3) + 0.5 * 0.2 * (-0.1),
            1.5 * (-0.1) - 0.1 * 0.2f64.powi(3),
        ];
        for j in 0..3 {
            assert!((got[j].re - want[j]).abs() < 1e-14, "comp {j}");
            assert!(got[j].im.abs() < 1e-15);
        }
    }

    #[test]
    fn real_harmonics_are_real() {
        let mut s = FourierSeries::zero(2, 8, 1.0);
        add_real_harmonic(&mut s, &[2, -1], HarmonicBasis::Sin, 0.7);
        add_real_harmonic(&mut s, &[1, 0], HarmonicBasis::Cos, -0.3);
        for phi in [[0.0, 0.0], [0.4, 1.3], [2.2, -0.8]] {
            let v = s.eval(&phi);
            let want = 0.7 * (2.0 * phi[0] - phi[1]).sin() - 0.3 * phi[0].cos();
            assert!((v.re - want).abs() < 1e-14);
            assert!(v.im.abs() < 1e-15);
        }
        assert!(s.symmetry_violation() < 1e-15);
    }

    #[test]
    fn validation_catches_bad_input() {
        let mut spec = default_vdp_spec(1e-6);
        spec.gamma0 = 0.0;
        assert!(spec.validate().is_err());
        let mut spec2 = default_vdp_spec(1e-6);
        if let ModelSpec::Vdp(cfg) = &mut spec2.model {
            cfg.b1 = 0.0;
        }
        assert!(spec2.validate().is_err());
    }
}
