use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fit::{fit_plm, predict_full, predict_ols, predict_submodel, PlmFit};
use super::kernel::{bandwidth_rule, default_bandwidth_scale, KernelSpec, KERNEL_ORDER};
use crate::dantzig::{DantzigFit, ROUND_OFF};
use crate::datamodel::{Dataset, SubmodelSplit};
use crate::instruments::{choose_star_columns, plan_instruments, AMethod, InstrumentPlan, StarSelection};
use crate::linalg::{center_columns, column_sds, select_columns};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub enum AlphaChoice {
    /// `γ̃^D`, the Dantzig estimate on the discarded coordinates.
    #[default]
    Dantzig,
    Given(DVector<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlphaSource {
    DantzigGamma,
    /// `γ̃^D` vanished on `U`; `α` is the sample covariance of `U` with the refit residual.
    ResidualCovariance,
    Given,
}

impl AlphaSource {
    pub fn label(self) -> &'static str {
        match self {
            AlphaSource::DantzigGamma => "dantzig_gamma",
            AlphaSource::ResidualCovariance => "residual_covariance",
            AlphaSource::Given => "given",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostDantzigOptions {
    pub d: usize,
    pub star: StarSelection,
    pub a_method: AMethod,
    /// Multiplier of the bandwidth rate; defaults to the geometric mean of the sds of `V`.
    pub bandwidth_scale: Option<f64>,
    pub leave_one_out: bool,
    pub alpha: AlphaChoice,
    /// Known per-row variances for the heteroscedastic estimator.
    pub variance: Option<DVector<f64>>,
}

impl Default for PostDantzigOptions {
    fn default() -> Self {
        Self {
            d: 1,
            star: StarSelection::default(),
            a_method: AMethod::default(),
            bandwidth_scale: None,
            leave_one_out: false,
            alpha: AlphaChoice::default(),
            variance: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PostDantzigFit {
    pub plm: PlmFit,
    pub plan: InstrumentPlan,
    pub split: SubmodelSplit,
    pub alpha_source: AlphaSource,
    pub bandwidth_scale: f64,
    /// Per-coordinate sds of the training `V`; the kernel sees `V / v_scale`.
    pub v_scale: DVector<f64>,
    pub theta_tilde_s: DVector<f64>,
}

impl PostDantzigFit {
    pub fn z_of(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        select_columns(x, &self.split.idx_z)
    }

    pub fn u_of(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        select_columns(x, &self.split.idx_u)
    }

    fn check_width(&self, x: &DMatrix<f64>) -> Result<()> {
        let p = self.split.q() + self.split.l();
        if x.ncols() != p {
            return Err(Error::Dimension(format!("expected {p} covariates, got {}", x.ncols())));
        }
        Ok(())
    }

    /// Instrument rows for new covariates using the frozen training plan.
    pub fn instrument(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(x)?;
        self.plan.instrument(&self.z_of(x), &self.u_of(x))
    }

    /// Instrument rows on the standardized scale used by the kernel.
    pub fn kernel_instrument(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(standardize(&self.instrument(x)?, &self.v_scale))
    }

    pub fn predict_full(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let v = self.kernel_instrument(x)?;
        predict_full(&self.plm, &self.z_of(x), &v)
    }

    pub fn predict_submodel(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_width(x)?;
        predict_submodel(&self.plm, &self.z_of(x))
    }

    pub fn predict_ols(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_width(x)?;
        predict_ols(&self.theta_tilde_s, &self.z_of(x))
    }

    /// Plain-text fit report (indices 1-based).
    pub fn report(&self) -> String {
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ");
        let idx = |v: &[usize]| v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(", ");
        let mut out = String::from("[post_dantzig]\n");
        out += &format!("selected = [{}]\n", idx(&self.split.idx_z));
        out += &format!("theta_hat = [{}]\n", fmt(self.plm.theta_hat.as_slice()));
        out += &format!("theta_tilde_S = [{}]\n", fmt(self.theta_tilde_s.as_slice()));
        out += &format!("sigma_V2_hat = {:.6e}\n", self.plm.sigma_v2_hat);
        out += &format!("bandwidth = {:.6e}\n", self.plm.kernel.bandwidth);
        out += &format!("bandwidth_scale = {:.6e}\n", self.bandwidth_scale);
        out += &format!("alpha_source = {}\n", self.alpha_source.label());
        out += &format!("S_n_eigenvalues = [{}]\n", fmt(self.plm.s_n_eigvals.as_slice()));
        out += &self.plan.report();
        out
    }
}

fn standardize(v: &DMatrix<f64>, scale: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] / scale[j])
}

/// Treats `γ̃^D` entries at LP round-off level as zero.
fn significant_gamma(beta_tilde: &DVector<f64>, idx_u: &[usize]) -> DVector<f64> {
    let cut = ROUND_OFF * beta_tilde.amax().max(1.0);
    DVector::from_iterator(
        idx_u.len(),
        idx_u.iter().map(|&j| if beta_tilde[j].abs() > cut { beta_tilde[j] } else { 0.0 }),
    )
}

/// Bias-corrected `θ̂` for the sub-model picked by `dfit`.
pub fn fit_post_dantzig(
    data: &Dataset,
    split: &SubmodelSplit,
    dfit: &DantzigFit,
    opts: &PostDantzigOptions,
) -> Result<PostDantzigFit> {
    if split.idx_u.is_empty() {
        return Err(Error::EmptyComplement);
    }
    if split.idx_z != dfit.active || dfit.beta_tilde.len() != data.p() {
        return Err(Error::InvalidInput("split does not match the Dantzig active set".into()));
    }
    let z = select_columns(&data.x, &split.idx_z);
    let u = select_columns(&data.x, &split.idx_u);

    let (alpha, source) = match &opts.alpha {
        AlphaChoice::Given(a) => (a.clone(), AlphaSource::Given),
        AlphaChoice::Dantzig => {
            let gamma = significant_gamma(&dfit.beta_tilde, &split.idx_u);
            if gamma.amax() > 0.0 {
                (gamma, AlphaSource::DantzigGamma)
            } else {
                let r = &data.y - &z * &dfit.theta_tilde_s;
                let r = r.add_scalar(-r.mean());
                let cov = center_columns(&u).tr_mul(&r) / data.n() as f64;
                (cov, AlphaSource::ResidualCovariance)
            }
        }
    };
    if alpha.len() != split.l() {
        return Err(Error::Dimension(format!("α has {} entries, U has {}", alpha.len(), split.l())));
    }
    debug!("alpha source {:?}, ‖α‖ = {:.3e}", source, alpha.norm());

    let residual = &data.y - &data.x * &dfit.beta_tilde;
    let star = choose_star_columns(&u, Some(&residual), opts.d, opts.star)?;
    let plan = plan_instruments(&z, &u, &alpha, opts.d, &star, opts.a_method)?;

    let sds = column_sds(&plan.v);
    if sds.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Numerical("instrument has a constant coordinate".into()));
    }
    let v_scale = DVector::from_vec(sds);
    let v_std = standardize(&plan.v, &v_scale);
    let scale = match opts.bandwidth_scale {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(Error::InvalidInput(format!("bandwidth scale must be positive, got {s}"))),
        None => default_bandwidth_scale(&v_std)?,
    };
    let h = bandwidth_rule(data.n(), opts.d, KERNEL_ORDER, scale);
    let kernel = KernelSpec::new(h, opts.d + 1)?.with_leave_one_out(opts.leave_one_out);
    let mut plm = fit_plm(&z, &data.y, &v_std, &kernel, opts.variance.as_ref())?;
    if source != AlphaSource::Given {
        plm.variant = plm.variant.with_dantzig_alpha();
    }
    Ok(PostDantzigFit {
        plm,
        plan,
        split: split.clone(),
        alpha_source: source,
        bandwidth_scale: scale,
        v_scale,
        theta_tilde_s: dfit.theta_tilde_s.clone(),
    })
}
