//! Uniform grid over the parameter interval and grid-tabulated scalars with
//! finite-difference `∂/∂a`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub a_min: f64,
    pub a_max: f64,
    /// Number of grid points, endpoints included (≥ 2).
    pub n: usize,
}

impl ParamGrid {
    pub fn new(a_min: f64, a_max: f64, n: usize) -> Self {
        assert!(n >= 2 && a_max > a_min);
        Self { a_min, a_max, n }
    }

    pub fn spacing(&self) -> f64 {
        (self.a_max - self.a_min) / (self.n - 1) as f64
    }

    pub fn value(&self, i: usize) -> f64 {
        self.a_min + self.spacing() * i as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }
}

/// Centered finite differences on a uniform grid, second-order one-sided at
/// the endpoints.
pub fn centered_diff(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 3);
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    d
}

pub fn centered_diff_c(values: &[Complex64], h: f64) -> Vec<Complex64> {
    let re: Vec<f64> = values.iter().map(|c| c.re).collect();
    let im: Vec<f64> = values.iter().map(|c| c.im).collect();
    let dre = centered_diff(&re, h);
    let dim = centered_diff(&im, h);
    dre.into_iter()
        .zip(dim)
        .map(|(a, b)| Complex64::new(a, b))
        .collect()
}

/// Grid-tabulated real scalar with its finite-difference `a`-derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDerivPair {
    pub grid: ParamGrid,
    pub value: Vec<f64>,
    pub deriv: Vec<f64>,
}

impl ParamDerivPair {
    pub fn from_values(grid: ParamGrid, value: Vec<f64>) -> Self {
        assert_eq!(value.len(), grid.n);
        let deriv = centered_diff(&value, grid.spacing());
        Self { grid, value, deriv }
    }

    pub fn from_fn(grid: ParamGrid, f: impl Fn(f64) -> f64) -> Self {
        let value: Vec<f64> = grid.values().into_iter().map(f).collect();
        Self::from_values(grid, value)
    }

    pub fn min_abs(&self) -> f64 {
        self.value.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    pub fn min_abs_deriv(&self) -> f64 {
        self.deriv.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values_uniform() {
        let g = ParamGrid::new(0.25, 1.25, 5);
        assert_eq!(g.values(), vec![0.25, 0.5, 0.75, 1.0, 1.25]);
        assert!((g.spacing() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn derivative_exact_on_quadratics() {
        // centered and one-sided 2nd-order differences are exact on degree-2
        let g = ParamGrid::new(0.0, 1.0, 11);
        let p = ParamDerivPair::from_fn(g, |a| 3.0 * a * a - 2.0 * a + 1.0);
        for (i, a) in g.values().into_iter().enumerate() {
            assert!((p.deriv[i] - (6.0 * a - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_second_order_on_smooth() {
        let err_at = |n: usize| {
            let g = ParamGrid::new(0.0, 1.0, n);
            let p = ParamDerivPair::from_fn(g, f64::sin);
            g.values()
                .into_iter()
                .enumerate()
                .map(|(i, a)| (p.deriv[i] - a.cos()).abs())
                .fold(0.0f64, f64::max)
        };
        let (e1, e2) = (err_at(33), err_at(65));
        assert!(e1 / e2 > 3.0, "convergence ratio {}", e1 / e2);
    }
}
