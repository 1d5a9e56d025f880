//! Data containers and the synthetic Gaussian design generator.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Observed response `Y` (length n) and covariates `X` (n × p).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "Y has length {} but X has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if y.len() < 2 {
            return Err(Error::InvalidInput(format!("need n ≥ 2 samples, got {}", y.len())));
        }
        if x.ncols() < 1 {
            return Err(Error::InvalidInput("need p ≥ 1 covariates".into()));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite entries".into()));
        }
        Ok(Self { y, x })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaType {
    I,
    II,
    III,
}

impl BetaType {
    /// Significant coefficients and their 1-based positions for this design.
    pub fn preset(self) -> (Vec<f64>, Vec<usize>) {
        match self {
            BetaType::I => (vec![1.0, 0.4, 0.3, 0.5, 0.3, 0.3, 0.3], (1..=7).collect()),
            BetaType::II => (
                vec![1.0, 0.4, 0.3, 0.5, 0.3, 0.3, 0.3],
                vec![1, 17, 33, 49, 65, 81, 97],
            ),
            BetaType::III => (vec![1.0, 0.4, -0.3, -0.5, 0.3, 0.3, -0.3], (1..=7).collect()),
        }
    }
}

fn default_tail_low() -> f64 {
    -0.5
}

fn default_tail_high() -> f64 {
    0.15
}

/// Significant coefficients plus the rule for the non-significant tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    #[serde(rename = "beta_I")]
    pub beta_i: Vec<f64>,
    /// 1-based positions of `beta_I`.
    #[serde(rename = "I")]
    pub index_set: Vec<usize>,
    pub beta_type: BetaType,
    #[serde(default = "default_tail_low")]
    pub tail_low: f64,
    #[serde(default = "default_tail_high")]
    pub tail_high: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CoefficientSpec {
    pub fn from_type(beta_type: BetaType, seed: u64) -> Self {
        let (beta_i, index_set) = beta_type.preset();
        Self {
            beta_i,
            index_set,
            beta_type,
            tail_low: default_tail_low(),
            tail_high: default_tail_high(),
            seed,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.beta_i.len() != self.index_set.len() {
            return Err(Error::InvalidInput(format!(
                "|beta_I| = {} but |I| = {}",
                self.beta_i.len(),
                self.index_set.len()
            )));
        }
        let mut seen = vec![false; p];
        for &i in &self.index_set {
            if i == 0 || i > p {
                return Err(Error::InvalidInput(format!("index {i} outside 1..={p}")));
            }
            if std::mem::replace(&mut seen[i - 1], true) {
                return Err(Error::InvalidInput(format!("duplicate index {i} in I")));
            }
        }
        if !(self.tail_low < self.tail_high) {
            return Err(Error::InvalidInput(format!(
                "tail_low ({}) must be below tail_high ({})",
                self.tail_low, self.tail_high
            )));
        }
        Ok(())
    }

    /// 0-based positions of the significant coefficients.
    pub fn zero_based_indices(&self) -> Vec<usize> {
        self.index_set.iter().map(|i| i - 1).collect()
    }
}

/// Toeplitz covariance with entries `(−ρ)^{|i−j|}`.
pub fn make_toeplitz_cov(rho_corr: f64, p: usize) -> Result<DMatrix<f64>> {
    if !(rho_corr.abs() < 1.0) {
        return Err(Error::InvalidInput(format!(
            "|rho_corr| must be below 1 for a non-degenerate covariance, got {rho_corr}"
        )));
    }
    if p == 0 {
        return Err(Error::InvalidInput("p must be at least 1".into()));
    }
    let base = -rho_corr;
    Ok(DMatrix::from_fn(p, p, |i, j| base.powi(i.abs_diff(j) as i32)))
}

/// Full coefficient vector: `beta_I` at `I`, every other entry drawn from
/// `U(tail_low, tail_high)` with negative draws set to zero.
pub fn make_beta(spec: &CoefficientSpec, p: usize) -> Result<DVector<f64>> {
    spec.validate(p)?;
    let mut rng = rng_from_seed(spec.seed);
    let mut beta = DVector::zeros(p);
    for b in beta.iter_mut() {
        let draw: f64 = rng.random_range(spec.tail_low..spec.tail_high);
        *b = draw.max(0.0);
    }
    for (&i, &b) in spec.index_set.iter().zip(&spec.beta_i) {
        beta[i - 1] = b;
    }
    Ok(beta)
}

/// Mean vector with 0 on the significant positions and `rest` elsewhere.
pub fn signal_zero_mean(p: usize, significant: &[usize], rest: f64) -> DVector<f64> {
    let mut mu = DVector::from_element(p, rest);
    for &i in significant {
        mu[i] = 0.0;
    }
    mu
}

/// `β'Σβ / (β'Σβ + σ²)`.
pub fn theoretical_r2(beta: &DVector<f64>, sigma_x: &DMatrix<f64>, sigma_eps: f64) -> Result<f64> {
    if !(sigma_eps >= 0.0) {
        return Err(Error::InvalidInput(format!("sigma_eps must be ≥ 0, got {sigma_eps}")));
    }
    let signal = quad_form(beta, sigma_x)?;
    let total = signal + sigma_eps * sigma_eps;
    if total <= 0.0 {
        return Err(Error::InvalidInput(
            "R² undefined: zero signal and zero noise".into(),
        ));
    }
    Ok(signal / total)
}

/// Noise level giving theoretical R² `r2`: `σ = sqrt(β'Σβ (1 − R²) / R²)`.
pub fn sigma_for_r2(beta: &DVector<f64>, sigma_x: &DMatrix<f64>, r2: f64) -> Result<f64> {
    if !(r2 > 0.0 && r2 <= 1.0) {
        return Err(Error::InvalidInput(format!("target R² must lie in (0, 1], got {r2}")));
    }
    let signal = quad_form(beta, sigma_x)?;
    if signal <= 0.0 {
        return Err(Error::InvalidInput("β'Σβ = 0; no noise level reaches the target R²".into()));
    }
    Ok((signal * (1.0 - r2) / r2).sqrt())
}

fn quad_form(beta: &DVector<f64>, sigma_x: &DMatrix<f64>) -> Result<f64> {
    if sigma_x.nrows() != beta.len() || sigma_x.ncols() != beta.len() {
        return Err(Error::Dimension(format!(
            "β has length {} but Σ is {}×{}",
            beta.len(),
            sigma_x.nrows(),
            sigma_x.ncols()
        )));
    }
    Ok(beta.dot(&(sigma_x * beta)))
}

/// Generating truth of the linear model `Y = β'X + ε`, `X ~ N(μ, Σ_X)`,
/// `ε ~ N(0, σ²)`.
#[derive(Debug, Clone)]
pub struct TrueModel {
    pub beta: DVector<f64>,
    pub rho_corr: f64,
    pub sigma_x: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub sigma_eps: f64,
    chol_l: DMatrix<f64>,
}

impl TrueModel {
    pub fn new(beta: DVector<f64>, rho_corr: f64, mu: DVector<f64>, sigma_eps: f64) -> Result<Self> {
        let sigma_x = make_toeplitz_cov(rho_corr, beta.len())?;
        Self::with_covariance(beta, rho_corr, sigma_x, mu, sigma_eps)
    }

    pub fn with_covariance(
        beta: DVector<f64>,
        rho_corr: f64,
        sigma_x: DMatrix<f64>,
        mu: DVector<f64>,
        sigma_eps: f64,
    ) -> Result<Self> {
        let p = beta.len();
        if mu.len() != p || sigma_x.nrows() != p || sigma_x.ncols() != p {
            return Err(Error::Dimension(format!(
                "β length {p}, μ length {}, Σ {}×{}",
                mu.len(),
                sigma_x.nrows(),
                sigma_x.ncols()
            )));
        }
        if !(sigma_eps >= 0.0) {
            return Err(Error::InvalidInput(format!("sigma_eps must be ≥ 0, got {sigma_eps}")));
        }
        let chol_l = Cholesky::new(sigma_x.clone())
            .ok_or_else(|| Error::Numerical("Cholesky failed: Σ_X is not positive definite".into()))?
            .unpack();
        Ok(Self {
            beta,
            rho_corr,
            sigma_x,
            mu,
            sigma_eps,
            chol_l,
        })
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn r2(&self) -> Result<f64> {
        theoretical_r2(&self.beta, &self.sigma_x, self.sigma_eps)
    }
}

/// Draws `n` i.i.d. rows from `model`. Row `i` consumes `p` standard normals
/// for `X_i` followed by one for `ε_i`, so output is a pure function of the seed.
pub fn simulate_dataset(model: &TrueModel, n: usize, seed: u64) -> Result<Dataset> {
    let p = model.p();
    let mut rng = rng_from_seed(seed);
    let mut x = DMatrix::zeros(n, p);
    let mut eps = DVector::zeros(n);
    let mut z = DVector::zeros(p);
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        let row = &model.chol_l * &z + &model.mu;
        x.row_mut(i).copy_from(&row.transpose());
        let e: f64 = rng.sample(StandardNormal);
        eps[i] = model.sigma_eps * e;
    }
    let y = &x * &model.beta + eps;
    Dataset::new(y, x)
}

/// Partition of `0..p` into the selected working set (`Z`) and its complement (`U`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmodelSplit {
    pub idx_z: Vec<usize>,
    pub idx_u: Vec<usize>,
}

impl SubmodelSplit {
    pub fn from_selected(selected: &[usize], p: usize) -> Result<Self> {
        let mut idx_z = selected.to_vec();
        idx_z.sort_unstable();
        idx_z.dedup();
        if idx_z.len() != selected.len() {
            return Err(Error::InvalidInput("duplicate indices in selection".into()));
        }
        if idx_z.is_empty() {
            return Err(Error::EmptySelection);
        }
        if let Some(&bad) = idx_z.iter().find(|&&j| j >= p) {
            return Err(Error::InvalidInput(format!("index {} outside 1..={p}", bad + 1)));
        }
        let idx_u = (0..p).filter(|j| idx_z.binary_search(j).is_err()).collect();
        Ok(Self { idx_z, idx_u })
    }

    pub fn q(&self) -> usize {
        self.idx_z.len()
    }

    pub fn l(&self) -> usize {
        self.idx_u.len()
    }
}
