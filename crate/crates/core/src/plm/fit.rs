use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::{nw_smooth, smooth_impl, KernelSpec};
use crate::linalg::{covariance, sym_eigen_desc};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlmVariant {
    GivenAlpha,
    DantzigAlpha,
    HeteroGivenAlpha,
    HeteroDantzigAlpha,
}

impl PlmVariant {
    pub fn is_hetero(self) -> bool {
        matches!(self, PlmVariant::HeteroGivenAlpha | PlmVariant::HeteroDantzigAlpha)
    }

    pub(crate) fn with_dantzig_alpha(self) -> Self {
        match self {
            PlmVariant::GivenAlpha | PlmVariant::DantzigAlpha => PlmVariant::DantzigAlpha,
            _ => PlmVariant::HeteroDantzigAlpha,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlmFit {
    pub theta_hat: DVector<f64>,
    pub s_n: DMatrix<f64>,
    pub s_n_eigvals: DVector<f64>,
    /// `ĝ` at the training instruments.
    pub g_values: DVector<f64>,
    pub y_resid: DVector<f64>,
    pub z_resid: DMatrix<f64>,
    pub sigma_v2_hat: f64,
    pub variant: PlmVariant,
    pub kernel: KernelSpec,
    pub v_train: DMatrix<f64>,
    /// Training partial residual `Y − θ̂'Z`, the response smoothed by `ĝ`.
    pub partial: DVector<f64>,
}

impl PlmFit {
    pub fn g_bar(&self) -> f64 {
        self.g_values.mean()
    }

    /// `ĝ` at arbitrary instrument rows (no leave-one-out).
    pub fn g_at(&self, v: &DMatrix<f64>) -> Result<DVector<f64>> {
        let m = DMatrix::from_column_slice(self.partial.len(), 1, self.partial.as_slice());
        Ok(nw_smooth(&m, &self.v_train, v, &self.kernel)?.column(0).into_owned())
    }
}

/// Residualizes `Y` and `Z` on `V` and solves `θ = S_n⁻¹ (1/n) Σ Z̃_i Ỹ_i`;
/// with `variance` given every term carries the weight `1/σ_i²`.
pub fn fit_plm(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    v: &DMatrix<f64>,
    kernel: &KernelSpec,
    variance: Option<&DVector<f64>>,
) -> Result<PlmFit> {
    let n = y.len();
    if z.nrows() != n || v.nrows() != n {
        return Err(Error::Dimension(format!(
            "Y has {n} rows, Z has {}, V has {}",
            z.nrows(),
            v.nrows()
        )));
    }
    if z.ncols() == 0 {
        return Err(Error::InvalidInput("Z has no columns".into()));
    }
    if let Some(s2) = variance {
        if s2.len() != n || s2.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidInput("variances must be positive, one per row".into()));
        }
    }
    let q = z.ncols();
    let mut joint = DMatrix::zeros(n, q + 1);
    joint.column_mut(0).copy_from(y);
    joint.columns_mut(1, q).copy_from(z);
    let smooth = smooth_impl(&joint, v, v, kernel, true)?;
    let resid = &joint - &smooth;
    let y_resid = resid.column(0).into_owned();
    let z_resid = resid.columns(1, q).into_owned();

    let weights = DVector::from_fn(n, |i, _| variance.map_or(1.0, |s2| 1.0 / s2[i]));
    let zw = DMatrix::from_fn(n, q, |i, j| z_resid[(i, j)] * weights[i]);
    let s_n = zw.tr_mul(&z_resid) / n as f64;
    let cross = zw.tr_mul(&y_resid) / n as f64;

    let (eig, _) = sym_eigen_desc(&s_n);
    let top = eig[0];
    // Relative to Z's own spread as well, so a single column can also be flagged.
    let z_scale = covariance(z).diagonal().max();
    if !(top > 0.0) || eig[q - 1] <= 1e-10 * top.max(z_scale) {
        return Err(Error::SingularSn);
    }
    let theta_hat = s_n
        .clone()
        .cholesky()
        .map(|c| c.solve(&cross))
        .or_else(|| s_n.clone().lu().solve(&cross))
        .ok_or(Error::SingularSn)?;

    let final_resid = &y_resid - &z_resid * &theta_hat;
    let sigma_v2_hat = final_resid.norm_squared() / n as f64;
    let partial = y - z * &theta_hat;
    // ĝ(V_i) = smoothed Y − θ'(smoothed Z), consistent with the residualization.
    let g_values = smooth.column(0) - smooth.columns(1, q) * &theta_hat;

    Ok(PlmFit {
        theta_hat,
        s_n,
        s_n_eigvals: eig,
        g_values,
        y_resid,
        z_resid,
        sigma_v2_hat,
        variant: if variance.is_some() {
            PlmVariant::HeteroGivenAlpha
        } else {
            PlmVariant::GivenAlpha
        },
        kernel: *kernel,
        v_train: v.clone(),
        partial,
    })
}

fn check_cols(fit_q: usize, z: &DMatrix<f64>) -> Result<()> {
    if z.ncols() != fit_q {
        return Err(Error::Dimension(format!("expected {fit_q} columns of Z, got {}", z.ncols())));
    }
    Ok(())
}

/// `θ̂'Z + ĝ(V)` per row.
pub fn predict_full(fit: &PlmFit, z_new: &DMatrix<f64>, v_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_cols(fit.theta_hat.len(), z_new)?;
    if v_new.nrows() != z_new.nrows() {
        return Err(Error::Dimension("Z and V row counts differ".into()));
    }
    Ok(z_new * &fit.theta_hat + fit.g_at(v_new)?)
}

/// `θ̂'Z + ḡ` with `ḡ` the training average of `ĝ`.
pub fn predict_submodel(fit: &PlmFit, z_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_cols(fit.theta_hat.len(), z_new)?;
    Ok((z_new * &fit.theta_hat).add_scalar(fit.g_bar()))
}

/// `θ̃_S'Z` per row.
pub fn predict_ols(theta_tilde_s: &DVector<f64>, z_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_cols(theta_tilde_s.len(), z_new)?;
    Ok(z_new * theta_tilde_s)
}
