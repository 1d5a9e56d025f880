//! TOML experiment configuration.
//!
//! ```toml
//! id = "baseline-typeI-r98"   # optional label used in emitted tables
//! n = 50
//! p = 100
//! S = 7
//! beta_type = "I"           # "I", "II" or "III"
//! rho_corr = 0.1
//! target_r2 = 0.98          # or: sigma_eps = 0.2 (exactly one of the two)
//! reps = 200
//! lambda_mode = { GaussianSup = 10 }   # or { Fixed = 3.5 }
//! varsigma = 1.5
//! use_sis = false
//! d_keep = 49               # SIS size, default n - 1
//! d_instr = 1
//! seed = 20240601
//! holdout_n = 200
//! # optional overrides
//! beta_I = [1.0, -1.5]      # significant coefficients (default: beta_type preset)
//! I = [1, 2]                # their 1-based positions
//! tail_low = -0.5           # other coefficients ~ U(tail_low, tail_high),
//! tail_high = 0.15          # negative draws set to 0
//! mu_rest = 2.0             # mean of covariates outside I (0 on I)
//! bandwidth_scale = 2.0     # kernel runs on standardized V
//! ```

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dantzig::LambdaMode;
use crate::datamodel::{
    make_beta, make_toeplitz_cov, sigma_for_r2, signal_zero_mean, BetaType, CoefficientSpec, TrueModel,
};
use crate::instruments::StarSelection;
use crate::rng::derive_seed;
use crate::screening::default_keep;
use crate::{Error, Result};

/// Threshold multiplier used by the harness unless the config overrides it.
pub const BENCH_VARSIGMA: f64 = 1.5;

/// Bandwidth multiplier used by the harness unless the config overrides it.
pub const BENCH_BANDWIDTH_SCALE: f64 = 2.0;

fn default_reps() -> usize {
    200
}
fn default_varsigma() -> f64 {
    BENCH_VARSIGMA
}
fn default_d_instr() -> usize {
    1
}
fn default_holdout() -> usize {
    200
}
fn default_mu_rest() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub n: usize,
    pub p: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub beta_type: BetaType,
    pub rho_corr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_eps: Option<f64>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub lambda_mode: LambdaMode,
    #[serde(default = "default_varsigma")]
    pub varsigma: f64,
    #[serde(default)]
    pub use_sis: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_keep: Option<usize>,
    #[serde(default = "default_d_instr")]
    pub d_instr: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_holdout")]
    pub holdout_n: usize,
    #[serde(default, rename = "beta_I", skip_serializing_if = "Option::is_none")]
    pub beta_i: Option<Vec<f64>>,
    #[serde(default, rename = "I", skip_serializing_if = "Option::is_none")]
    pub index_set: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_high: Option<f64>,
    #[serde(default = "default_mu_rest")]
    pub mu_rest: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_scale: Option<f64>,
    #[serde(default)]
    pub star_selection: StarSelection,
}

/// The data-generating truth implied by a config.
#[derive(Debug, Clone)]
pub struct ResolvedDesign {
    pub model: TrueModel,
    pub coef: CoefficientSpec,
    pub beta_seed: u64,
    pub r2: f64,
}

impl ExperimentConfig {
    /// Type-preset config with every optional field at its default.
    pub fn new(n: usize, p: usize, beta_type: BetaType, rho_corr: f64, target_r2: f64) -> Self {
        Self {
            id: None,
            n,
            p,
            s: beta_type.preset().0.len(),
            beta_type,
            rho_corr,
            target_r2: Some(target_r2),
            sigma_eps: None,
            reps: default_reps(),
            lambda_mode: LambdaMode::default(),
            varsigma: default_varsigma(),
            use_sis: false,
            d_keep: None,
            d_instr: default_d_instr(),
            seed: 0,
            holdout_n: default_holdout(),
            beta_i: None,
            index_set: None,
            tail_low: None,
            tail_high: None,
            mu_rest: default_mu_rest(),
            bandwidth_scale: None,
            star_selection: StarSelection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn label(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            let noise = match (self.target_r2, self.sigma_eps) {
                (Some(r2), _) => format!("r2={r2}"),
                (_, Some(s)) => format!("sigma={s}"),
                _ => String::new(),
            };
            format!(
                "type{:?}-n{}-p{}-rho{}-{}",
                self.beta_type, self.n, self.p, self.rho_corr, noise
            )
        })
    }

    pub fn coefficient_spec(&self) -> CoefficientSpec {
        let mut spec = CoefficientSpec::from_type(self.beta_type, derive_seed(self.seed, 0));
        if let Some(b) = &self.beta_i {
            spec.beta_i = b.clone();
        }
        if let Some(i) = &self.index_set {
            spec.index_set = i.clone();
        }
        if let Some(v) = self.tail_low {
            spec.tail_low = v;
        }
        if let Some(v) = self.tail_high {
            spec.tail_high = v;
        }
        spec
    }

    pub fn effective_d_keep(&self) -> usize {
        self.d_keep.unwrap_or_else(|| default_keep(self.n))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 2 || self.p < 1 {
            return bad(format!("need n ≥ 2 and p ≥ 1, got n = {}, p = {}", self.n, self.p));
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.holdout_n == 0 {
            return bad("holdout_n must be at least 1".into());
        }
        match (self.target_r2, self.sigma_eps) {
            (Some(r2), None) if r2 > 0.0 && r2 < 1.0 => {}
            (Some(r2), None) => return bad(format!("target_r2 must lie in (0, 1), got {r2}")),
            (None, Some(s)) if s >= 0.0 && s.is_finite() => {}
            (None, Some(s)) => return bad(format!("sigma_eps must be ≥ 0, got {s}")),
            _ => return bad("set exactly one of target_r2 and sigma_eps".into()),
        }
        if !(self.rho_corr.abs() < 1.0) {
            return bad(format!("rho_corr must lie in (-1, 1), got {}", self.rho_corr));
        }
        if !(self.varsigma >= 0.0) {
            return bad(format!("varsigma must be ≥ 0, got {}", self.varsigma));
        }
        if self.d_instr == 0 {
            return bad("d_instr must be at least 1".into());
        }
        if self.d_keep == Some(0) {
            return bad("d_keep must be at least 1".into());
        }
        if let Some(s) = self.bandwidth_scale {
            if !(s > 0.0) {
                return bad(format!("bandwidth_scale must be positive, got {s}"));
            }
        }
        match self.lambda_mode {
            LambdaMode::GaussianSup(0) => return bad("GaussianSup needs at least one realization".into()),
            LambdaMode::Fixed(v) if !(v >= 0.0) => return bad(format!("Fixed λ must be ≥ 0, got {v}")),
            _ => {}
        }
        let spec = self.coefficient_spec();
        spec.validate(self.p).map_err(|e| Error::Config(e.to_string()))?;
        if spec.beta_i.len() != self.s {
            return bad(format!("S = {} but {} significant coefficients given", self.s, spec.beta_i.len()));
        }
        Ok(())
    }

    /// Draws `β` (once per experiment) and fixes the noise level.
    pub fn resolve(&self) -> Result<ResolvedDesign> {
        self.validate()?;
        let coef = self.coefficient_spec();
        let beta = make_beta(&coef, self.p)?;
        let sigma_x = make_toeplitz_cov(self.rho_corr, self.p)?;
        let sigma_eps = match (self.target_r2, self.sigma_eps) {
            (Some(r2), _) => sigma_for_r2(&beta, &sigma_x, r2)?,
            (_, Some(s)) => s,
            _ => unreachable!("validated"),
        };
        let mu: DVector<f64> = signal_zero_mean(self.p, &coef.zero_based_indices(), self.mu_rest);
        let model = TrueModel::with_covariance(beta, self.rho_corr, sigma_x, mu, sigma_eps)?;
        let r2 = model.r2().unwrap_or(f64::NAN);
        Ok(ResolvedDesign {
            beta_seed: coef.seed,
            model,
            coef,
            r2,
        })
    }
}
