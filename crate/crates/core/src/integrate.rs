//! Numerical integration utilities: Gauss–Legendre quadrature now; the
//! adaptive Runge–Kutta ODE/DDE integrators live here as well.

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton iteration on the
/// Legendre polynomial; accurate to machine precision for n ≤ a few hundred).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-type initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by the three-term recurrence
            let (mut p0, mut p1) = (1.0f64, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre nodes and weights transplanted to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.into_iter().map(|t| mid + half * t).collect(),
        w.into_iter().map(|t| half * t).collect(),
    )
}

use crate::error::Error;
use crate::Result;

// ---------------------------------------------------------------------------
// Adaptive Dormand–Prince 5(4) with continuous (dense) output
// ---------------------------------------------------------------------------

/// Nodes of the Dormand–Prince 5(4) pair.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

/// Strictly lower-triangular stage coefficients; row `i` feeds stage `i+1`.
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Difference between the 5th- and 4th-order weights (error estimator).
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Coefficients of the 4th-order continuous extension (Hairer–Nørsett–Wanner).
const DP_D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step with its quartic interpolant in the local variable
/// θ = (t − t0)/h ∈ [0, 1].
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseStep {
    fn build(t0: f64, h: f64, y0: &[f64], y1: &[f64], k: &[Vec<f64>; 7]) -> Self {
        let dim = y0.len();
        let mut rcont = [
            y0.to_vec(),
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
        ];
        for i in 0..dim {
            let ydiff = y1[i] - y0[i];
            let bspl = h * k[0][i] - ydiff;
            rcont[1][i] = ydiff;
            rcont[2][i] = bspl;
            rcont[3][i] = ydiff - h * k[6][i] - bspl;
            rcont[4][i] = h * DP_D.iter().zip(k).map(|(d, kj)| d * kj[i]).sum::<f64>();
        }
        DenseStep { t0, h, rcont }
    }

    /// Interpolated state at `t` (valid for t in [t0, t0 + h]).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        (0..r1.len())
            .map(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
            .collect()
    }
}

/// Continuous solution of an initial-value problem on `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<DenseStep>,
    pub t_start: f64,
    pub t_end: f64,
    pub y_end: Vec<f64>,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

impl Trajectory {
    /// Dense-output evaluation; `t` is clamped to the covered interval.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(self.t_start, self.t_end);
        // last step whose start lies at or before t
        let idx = self
            .steps
            .partition_point(|s| s.t0 <= t)
            .saturating_sub(1);
        self.steps[idx].eval(t)
    }
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const MAX_STEPS: usize = 50_000_000;

/// One trial step from `(t, y)` with slope `k1` already evaluated (FSAL).
/// Returns the candidate state, the stage slopes, and the scaled error norm.
fn dp_attempt<F: FnMut(f64, &[f64], &mut [f64])>(
    f: &mut F,
    t: f64,
    y: &[f64],
    k1: &[f64],
    h: f64,
    rtol: f64,
    atol: f64,
) -> (Vec<f64>, [Vec<f64>; 7], f64) {
    let dim = y.len();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
    k[0].copy_from_slice(k1);
    let mut ystage = vec![0.0; dim];
    for s in 1..7 {
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += DP_A[s - 1][j] * kj[i];
            }
            ystage[i] = y[i] + h * acc;
        }
        let (head, tail) = k.split_at_mut(s);
        let _ = head;
        f(t + DP_C[s] * h, &ystage, &mut tail[0]);
    }
    // stage 7 reuses the b-row, so ystage after s = 6 is the 5th-order result
    let ynew = ystage.clone();
    let mut err2 = 0.0;
    for i in 0..dim {
        let e: f64 = h * DP_E.iter().zip(&k).map(|(c, kj)| c * kj[i]).sum::<f64>();
        let sc = atol + rtol * y[i].abs().max(ynew[i].abs());
        err2 += (e / sc) * (e / sc);
    }
    let err = (err2 / dim as f64).sqrt();
    (ynew, k, err)
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (requires `t1 > t0`) with the
/// Dormand–Prince 5(4) pair, returning a trajectory with dense output.
/// `max_step`, when given, also sets the initial step size, so pairing it with
/// huge tolerances yields a fixed-step run (used by the order tests).
pub fn integrate_ode<F: FnMut(f64, &[f64], &mut [f64])>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    rtol: f64,
    atol: f64,
    max_step: Option<f64>,
) -> Result<Trajectory> {
    if !(t1 > t0) || !y0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(
            "integrate_ode: need t1 > t0 and finite initial data".into(),
        ));
    }
    let dim = y0.len();
    let hmax = max_step.unwrap_or(t1 - t0).min(t1 - t0);
    let mut h = match max_step {
        Some(m) => m.min(t1 - t0),
        None => (1e-4 * (t1 - t0)).min(hmax),
    };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    f(t, &y, &mut k1);
    let mut steps = Vec::new();
    let (mut n_accepted, mut n_rejected) = (0usize, 0usize);
    for _ in 0..MAX_STEPS {
        if t >= t1 {
            break;
        }
        h = h.min(t1 - t);
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::IntegrationFailure(format!(
                "step size underflow at t = {t:.6e}"
            )));
        }
        let (ynew, k, err) = dp_attempt(&mut f, t, &y, &k1, h, rtol, atol);
        let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX);
        if err <= 1.0 {
            steps.push(DenseStep::build(t, h, &y, &ynew, &k));
            t += h;
            y = ynew;
            k1.copy_from_slice(&k[6]);
            n_accepted += 1;
            h = (h * fac).min(hmax);
        } else {
            n_rejected += 1;
            h *= fac.min(1.0);
        }
    }
    if t < t1 {
        return Err(Error::IntegrationFailure(format!(
            "step budget exhausted at t = {t:.6e} of {t1:.6e}"
        )));
    }
    Ok(Trajectory {
        steps,
        t_start: t0,
        t_end: t1,
        y_end: y,
        n_accepted,
        n_rejected,
    })
}

/// Integrates the delay equation `y'(t) = f(t, y(t), y(t − τ))` on `[t0, t1]`
/// by the method of steps: every accepted step is capped at the next multiple
/// of τ past `t0`, so the delayed argument always falls in an already-completed
/// segment (or in the history for t ≤ t0) and is read from the dense output.
pub fn integrate_dde<F, H>(
    mut f: F,
    tau: f64,
    history: H,
    t0: f64,
    t1: f64,
    rtol: f64,
    atol: f64,
    max_step: Option<f64>,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &[f64], &mut [f64]),
    H: Fn(f64) -> Vec<f64>,
{
    if !(tau > 0.0) || !(t1 > t0) {
        return Err(Error::InvalidInput(
            "integrate_dde: need tau > 0 and t1 > t0".into(),
        ));
    }
    let y0 = history(t0);
    let dim = y0.len();
    let hmax = max_step.unwrap_or(tau).min(tau).min(t1 - t0);
    let mut h = match max_step {
        Some(m) => m.min(hmax),
        None => (1e-3 * tau).min(hmax),
    };
    let mut steps: Vec<DenseStep> = Vec::new();
    let delayed = |steps: &[DenseStep], t: f64| -> Vec<f64> {
        if t <= t0 || steps.is_empty() {
            history(t)
        } else {
            let idx = steps.partition_point(|s| s.t0 <= t).saturating_sub(1);
            steps[idx].eval(t.min(steps[idx].t0 + steps[idx].h))
        }
    };
    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = vec![0.0; dim];
    f(t0, &y0, &history(t0 - tau), &mut k1);
    let (mut n_accepted, mut n_rejected) = (0usize, 0usize);
    for _ in 0..MAX_STEPS {
        if t >= t1 {
            break;
        }
        // align with the delay grid so the delayed argument never enters the
        // step currently being built
        let mut seg_end = t0 + (((t - t0) / tau).floor() + 1.0) * tau;
        if seg_end - t < 1e-9 * tau {
            // t landed on a boundary up to roundoff; avoid a sliver step
            seg_end += tau;
        }
        let cap = seg_end.min(t1) - t;
        h = h.min(cap).min(hmax);
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::IntegrationFailure(format!(
                "DDE step size underflow at t = {t:.6e}"
            )));
        }
        let (ynew, k, err) = {
            let steps_ref: &[DenseStep] = &steps;
            let mut g = |tt: f64, yy: &[f64], dy: &mut [f64]| {
                let yd = delayed(steps_ref, tt - tau);
                f(tt, yy, &yd, dy);
            };
            dp_attempt(&mut g, t, &y, &k1, h, rtol, atol)
        };
        let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX);
        if err <= 1.0 {
            steps.push(DenseStep::build(t, h, &y, &ynew, &k));
            t += h;
            y = ynew;
            // FSAL slope must be re-evaluated: crossing a delay-grid boundary
            // changes which dense segment feeds the delayed argument
            let yd = delayed(&steps, t - tau);
            f(t, &y, &yd, &mut k1);
            n_accepted += 1;
            h *= fac;
        } else {
            n_rejected += 1;
            h *= fac.min(1.0);
        }
    }
    if t < t1 {
        return Err(Error::IntegrationFailure(format!(
            "DDE step budget exhausted at t = {t:.6e} of {t1:.6e}"
        )));
    }
    Ok(Trajectory {
        steps,
        t_start: t0,
        t_end: t1,
        y_end: y,
        n_accepted,
        n_rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_exact_on_polynomials() {
        // n-point rule is exact through degree 2n−1
        let (x, w) = gauss_legendre(5);
        for deg in 0..=9u32 {
            let got: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * xi.powi(deg as i32))
                .sum();
            let want = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            assert!((got - want).abs() < 1e-14, "degree {deg}: {got} vs {want}");
        }
    }

    #[test]
    fn quadrature_smooth_integrand() {
        // ∫₀¹ e^x dx = e − 1, 64 nodes
        let (x, w) = gauss_legendre_on(64, 0.0, 1.0);
        let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.exp()).sum();
        assert!((got - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_length() {
        for n in [1, 2, 3, 8, 64, 129] {
            let (_, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn ode_zero_rhs_is_constant() {
        let traj = integrate_ode(
            |_t, _y, dy| dy.fill(0.0),
            0.0,
            10.0,
            &[1.5, -2.0],
            1e-12,
            1e-12,
            None,
        )
        .unwrap();
        assert_eq!(traj.y_end, vec![1.5, -2.0]);
        let mid = traj.eval(3.7);
        assert_eq!(mid, vec![1.5, -2.0]);
    }

    #[test]
    fn ode_exponential_endpoint_accuracy() {
        let traj = integrate_ode(
            |_t, y, dy| dy[0] = y[0],
            0.0,
            5.0,
            &[1.0],
            1e-12,
            1e-14,
            None,
        )
        .unwrap();
        assert!((traj.y_end[0] - 5f64.exp()).abs() / 5f64.exp() < 1e-10);
        // dense output mid-interval
        let m = traj.eval(2.345)[0];
        assert!((m - 2.345f64.exp()).abs() / 2.345f64.exp() < 1e-8);
    }

    #[test]
    fn ode_rotation_block_conserves_energy() {
        let om = 1.7;
        let traj = integrate_ode(
            |_t, y, dy| {
                dy[0] = 0.0;
                dy[1] = -om * y[2];
                dy[2] = om * y[1];
            },
            0.0,
            100.0,
            &[0.3, 1.0, 0.0],
            1e-13,
            1e-13,
            None,
        )
        .unwrap();
        // check the invariant along dense output as well as at the endpoint
        for i in 0..=200 {
            let y = traj.eval(0.5 * i as f64);
            let e = y[1] * y[1] + y[2] * y[2];
            assert!((e - 1.0).abs() < 1e-10, "t = {}: energy {e}", 0.5 * i as f64);
        }
        assert!((traj.y_end[0] - 0.3).abs() < 1e-13);
    }

    #[test]
    fn ode_self_convergence_under_tolerance_halving() {
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0].sin() + 0.1 * (2.0 * t).cos();
        };
        let a = integrate_ode(rhs, 0.0, 20.0, &[1.0, 0.0], 1e-12, 1e-12, None).unwrap();
        let b = integrate_ode(rhs, 0.0, 20.0, &[1.0, 0.0], 5e-13, 5e-13, None).unwrap();
        let diff = (a.y_end[0] - b.y_end[0])
            .abs()
            .max((a.y_end[1] - b.y_end[1]).abs());
        assert!(diff < 1e-9, "endpoint shift {diff:.3e}");
    }

    #[test]
    fn dde_zero_history_stays_zero() {
        let traj = integrate_dde(
            |_t, y, yd, dy| dy[0] = -y[0] + yd[0] + yd[0].powi(3),
            1.0,
            |_t| vec![0.0],
            0.0,
            20.0,
            1e-12,
            1e-12,
            None,
        )
        .unwrap();
        assert_eq!(traj.y_end[0], 0.0);
    }

    #[test]
    fn dde_piecewise_polynomial_solution_exact() {
        // y'(t) = −y(t−1), y ≡ 1 on [−1, 0]: the method-of-steps solution is
        // y(t) = Σ_{j≥0} (−1)^j (t − j + 1)^j / j!  truncated at j ≤ ⌊t⌋ + 1.
        let traj = integrate_dde(
            |_t, _y, yd, dy| dy[0] = -yd[0],
            1.0,
            |_t| vec![1.0],
            0.0,
            3.0,
            1e-12,
            1e-12,
            None,
        )
        .unwrap();
        let exact = |t: f64| -> f64 {
            let jmax = t.floor() as i32 + 1;
            let mut s = 0.0;
            let mut fact = 1.0;
            for j in 0..=jmax {
                if j > 0 {
                    fact *= j as f64;
                }
                let base = t - j as f64 + 1.0;
                if base >= 0.0 {
                    s += (-1f64).powi(j) * base.powi(j) / fact;
                }
            }
            s
        };
        for &t in &[0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
            let got = traj.eval(t)[0];
            assert!(
                (got - exact(t)).abs() < 1e-10,
                "t = {t}: {got} vs {}",
                exact(t)
            );
        }
        assert!((traj.y_end[0] - (-1.0 / 6.0)).abs() < 1e-10);
    }

    #[test]
    fn dde_manufactured_solution_order_at_least_four() {
        // y(t) = sin t solves y'(t) = cos t + y(t−τ) − sin(t−τ) exactly, so a
        // fixed-step sweep measures the raw order of the delay stepping
        // (including the interpolation feeding the delayed argument).
        let tau = 0.7;
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for k in 0..4 {
            let h = 0.07 / (2f64.powi(k));
            let traj = integrate_dde(
                |t: f64, _y: &[f64], yd: &[f64], dy: &mut [f64]| {
                    dy[0] = t.cos() + yd[0] - (t - tau).sin();
                },
                tau,
                |t| vec![t.sin()],
                0.0,
                7.0,
                1e30,
                1e30,
                Some(h),
            )
            .unwrap();
            let err = (traj.y_end[0] - 7f64.sin()).abs();
            hs.push(h.ln());
            errs.push(err.max(1e-16).ln());
        }
        // least-squares slope of ln err vs ln h
        let n = hs.len() as f64;
        let mx = hs.iter().sum::<f64>() / n;
        let my = errs.iter().sum::<f64>() / n;
        let slope: f64 = hs
            .iter()
            .zip(&errs)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / hs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        assert!(slope >= 4.0, "observed order {slope:.2}");
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(integrate_ode(|_t, _y, dy| dy.fill(0.0), 1.0, 0.0, &[0.0], 1e-9, 1e-9, None).is_err());
        assert!(
            integrate_dde(|_t, _y, _yd, dy| dy.fill(0.0), 0.0, |_t| vec![0.0], 0.0, 1.0, 1e-9, 1e-9, None)
                .is_err()
        );
    }
}
