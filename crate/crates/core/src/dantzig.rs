//! The Dantzig selector, the Gaussian-supremum rule for `λ_p`, and the
//! two-stage Gaussian Dantzig refit.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{lstsq, select_columns};
use crate::lpsolver::{solve_lp, LinearProgram, LpStatus};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

pub const DEFAULT_VARSIGMA: f64 = 1e-4;
pub const DEFAULT_GAUSSIAN_REALIZATIONS: usize = 10;
/// Relative size below which an LP coefficient counts as zero.
pub const ROUND_OFF: f64 = 1e-10;
/// Largest `p` handed to the dense simplex; screen first above this.
pub const MAX_LP_DIM: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaMode {
    GaussianSup(usize),
    Fixed(f64),
}

impl Default for LambdaMode {
    fn default() -> Self {
        LambdaMode::GaussianSup(DEFAULT_GAUSSIAN_REALIZATIONS)
    }
}

impl LambdaMode {
    pub fn resolve(self, x: &DMatrix<f64>, seed: u64) -> Result<f64> {
        match self {
            LambdaMode::GaussianSup(m) => select_lambda_gaussian(x, m, seed),
            LambdaMode::Fixed(v) if v >= 0.0 && v.is_finite() => Ok(v),
            LambdaMode::Fixed(v) => Err(Error::InvalidInput(format!("λ_p must be ≥ 0, got {v}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DantzigFit {
    pub beta_tilde: DVector<f64>,
    pub lambda_p: f64,
    pub sigma: f64,
    /// Sorted 0-based indices with `|β̃_j| > ςσ`.
    pub active: Vec<usize>,
    pub theta_tilde_s: DVector<f64>,
    pub varsigma: f64,
}

impl DantzigFit {
    /// Largest constraint violation `max_j |x_j'(Y − Xβ̃)| − λ_pσ` (≤ 0 when feasible).
    pub fn constraint_slack(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
        let r = y - x * &self.beta_tilde;
        (x.transpose() * r).amax() - self.lambda_p * self.sigma
    }
}

/// `λ_p = max over m draws z ~ N(0, I_n) of max_j |x_j'z|`.
pub fn select_lambda_gaussian(x: &DMatrix<f64>, m: usize, seed: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("need at least one Gaussian realization".into()));
    }
    let mut rng = rng_from_seed(seed);
    let n = x.nrows();
    let mut best = 0.0_f64;
    for _ in 0..m {
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        best = best.max((x.tr_mul(&z)).amax());
    }
    Ok(best)
}

/// Minimises `‖β‖₁` subject to `‖X'(Y − Xβ)‖_∞ ≤ λ_p σ`.
pub fn dantzig_select(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda_p: f64,
    sigma: f64,
    tol: f64,
) -> Result<DVector<f64>> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("X has {n} rows, Y has {}", y.len())));
    }
    if p > MAX_LP_DIM {
        return Err(Error::InvalidInput(format!(
            "p = {p} exceeds {MAX_LP_DIM}; run SIS screening first"
        )));
    }
    let t = lambda_p * sigma;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("λ_p σ must be finite and ≥ 0, got {t}")));
    }
    let c = x.tr_mul(y);
    if t >= c.amax() {
        return Ok(DVector::zeros(p));
    }
    let g = x.tr_mul(x);

    // Variables (u, v) ≥ 0 with β = u − v. Rows: −G β ≤ t − c, G β ≤ t + c.
    let a = DMatrix::from_fn(2 * p, 2 * p, |i, j| {
        let sign_row = if i < p { -1.0 } else { 1.0 };
        let sign_col = if j < p { 1.0 } else { -1.0 };
        sign_row * sign_col * g[(i % p, j % p)]
    });
    let b: Vec<f64> = (0..2 * p)
        .map(|i| if i < p { t - c[i] } else { t + c[i - p] })
        .collect();
    let lp = LinearProgram::new(vec![1.0; 2 * p], a, b, true)?;
    let sol = solve_lp(&lp, tol, lp.default_max_iter())?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    let beta = DVector::from_iterator(p, (0..p).map(|j| sol.w[j] - sol.w[p + j]));
    let violation = (&c - &g * &beta).amax() - t;
    if violation > 1e-6 * (1.0 + t) {
        warn!("Dantzig constraint violated by {violation:.3e} after LP solve");
    }
    Ok(beta)
}

/// Thresholds `β̃` at `ςσ` and refits least squares on the surviving columns.
/// Entries at LP round-off level never survive, even when `ςσ = 0`.
pub fn gaussian_dantzig(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta_tilde: &DVector<f64>,
    varsigma: f64,
    sigma: f64,
) -> Result<(Vec<usize>, DVector<f64>)> {
    if beta_tilde.len() != x.ncols() {
        return Err(Error::Dimension(format!(
            "β̃ has {} entries, X has {} columns",
            beta_tilde.len(),
            x.ncols()
        )));
    }
    let cut = (varsigma * sigma).max(ROUND_OFF * beta_tilde.amax().max(1.0));
    let active: Vec<usize> = (0..beta_tilde.len()).filter(|&j| beta_tilde[j].abs() > cut).collect();
    if active.is_empty() {
        return Err(Error::EmptySelection);
    }
    let theta = lstsq(&select_columns(x, &active), y)?;
    Ok((active, theta))
}

/// Dantzig selection followed by the Gaussian refit.
pub fn fit_dantzig(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma: f64,
    lambda_p: f64,
    varsigma: f64,
    tol: f64,
) -> Result<DantzigFit> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("σ must be finite and ≥ 0, got {sigma}")));
    }
    let beta_tilde = dantzig_select(x, y, lambda_p, sigma, tol)?;
    let (active, theta_tilde_s) = gaussian_dantzig(x, y, &beta_tilde, varsigma, sigma)?;
    Ok(DantzigFit {
        beta_tilde,
        lambda_p,
        sigma,
        active,
        theta_tilde_s,
        varsigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpsolver::DEFAULT_TOL;
    use approx::assert_abs_diff_eq;

    fn orthonormal_3() -> DMatrix<f64> {
        // Columns of a scaled Hadamard block: orthonormal in R^4.
        DMatrix::from_row_slice(
            4,
            3,
            &[0.5, 0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5, -0.5],
        )
    }

    #[test]
    fn zero_design_gives_zero_lambda() {
        let x = DMatrix::zeros(10, 4);
        assert_eq!(select_lambda_gaussian(&x, 5, 1).unwrap(), 0.0);
    }

    #[test]
    fn lambda_linear_in_x() {
        let x = DMatrix::from_fn(20, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let a = select_lambda_gaussian(&x, 4, 9).unwrap();
        let b = select_lambda_gaussian(&(&x * 2.0), 4, 9).unwrap();
        assert_abs_diff_eq!(b, 2.0 * a, epsilon = 1e-12);
    }

    #[test]
    fn large_lambda_gives_zero() {
        let x = orthonormal_3();
        let y = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        let b = dantzig_select(&x, &y, 100.0, 1.0, DEFAULT_TOL).unwrap();
        assert!(b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn soft_threshold_on_orthonormal_design() {
        let x = orthonormal_3();
        let y = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        let c = x.tr_mul(&y);
        let t = 0.3;
        let b = dantzig_select(&x, &y, t, 1.0, DEFAULT_TOL).unwrap();
        for j in 0..3 {
            let expect = c[j].signum() * (c[j].abs() - t).max(0.0);
            assert_abs_diff_eq!(b[j], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_lambda_inverts_square_design() {
        let x = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = dantzig_select(&x, &y, 0.0, 1.0, DEFAULT_TOL).unwrap();
        let expect = x.clone().lu().solve(&y).unwrap();
        assert_abs_diff_eq!(b, expect, epsilon = 1e-9);
    }

    #[test]
    fn empty_selection_is_error() {
        let x = orthonormal_3();
        let y = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        let zero = DVector::zeros(3);
        assert!(matches!(
            gaussian_dantzig(&x, &y, &zero, 1e-4, 1.0),
            Err(Error::EmptySelection)
        ));
    }

    #[test]
    fn refit_on_orthonormal_design_is_projection() {
        let x = orthonormal_3();
        let y = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        let bt = DVector::from_vec(vec![0.1, -0.2, 0.3]);
        let (active, theta) = gaussian_dantzig(&x, &y, &bt, 0.0, 1.0).unwrap();
        assert_eq!(active, vec![0, 1, 2]);
        assert_abs_diff_eq!(theta, x.tr_mul(&y), epsilon = 1e-12);
    }

    #[test]
    fn noiseless_refit_is_exact() {
        let x = DMatrix::from_fn(12, 5, |i, j| ((i * 5 + j * 7) % 13) as f64 / 13.0 + (i == j) as u8 as f64);
        let beta = DVector::from_vec(vec![1.0, 0.0, -2.0, 0.0, 0.5]);
        let y = &x * &beta;
        let bt = DVector::from_vec(vec![0.9, 0.0, -1.5, 0.0, 0.2]);
        let (active, theta) = gaussian_dantzig(&x, &y, &bt, 1e-4, 1.0).unwrap();
        assert_eq!(active, vec![0, 2, 4]);
        assert_abs_diff_eq!(theta, DVector::from_vec(vec![1.0, -2.0, 0.5]), epsilon = 1e-10);
    }

    #[test]
    fn oversized_problem_rejected() {
        let x = DMatrix::zeros(2, MAX_LP_DIM + 1);
        let y = DVector::zeros(2);
        assert!(matches!(dantzig_select(&x, &y, 1.0, 1.0, 1e-9), Err(Error::InvalidInput(_))));
    }
}
