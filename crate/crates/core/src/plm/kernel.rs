use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::linalg::column_sds;
use crate::{Error, Result};

/// Order of the Gaussian kernel.
pub const KERNEL_ORDER: usize = 2;

const LN_UNDERFLOW: f64 = -690.7755278982137; // ln(1e-300)

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub bandwidth: f64,
    /// Dimension of the kernel argument (`d + 1`).
    pub dim: usize,
    pub order: usize,
    /// Drop the `k = i` term when smoothing at a training point.
    pub leave_one_out: bool,
}

impl KernelSpec {
    pub fn new(bandwidth: f64, dim: usize) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("kernel dimension must be at least 1".into()));
        }
        Ok(Self {
            bandwidth,
            dim,
            order: KERNEL_ORDER,
            leave_one_out: false,
        })
    }

    pub fn with_leave_one_out(mut self, on: bool) -> Self {
        self.leave_one_out = on;
        self
    }

    fn log_weight(&self, sq_dist: f64) -> f64 {
        let h = self.bandwidth;
        let k = self.dim as f64;
        -0.5 * k * (2.0 * std::f64::consts::PI).ln() - k * h.ln() - sq_dist / (2.0 * h * h)
    }
}

/// `L_H(diff) = h^{-(d+1)} ∏_j φ(diff_j / h)` with `φ` the standard normal density.
pub fn product_kernel_weight(diff: &[f64], h: f64) -> f64 {
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    diff.iter().map(|&x| (-(x / h).powi(2) / 2.0).exp() / (norm * h)).product()
}

/// `h = scale · n^{-1/(2(k+d+1))}`.
pub fn bandwidth_rule(n: usize, d: usize, k: usize, scale: f64) -> f64 {
    scale * (n as f64).powf(-1.0 / (2.0 * (k + d + 1) as f64))
}

/// Geometric mean of the per-coordinate sample standard deviations of `V`.
pub fn default_bandwidth_scale(v: &DMatrix<f64>) -> Result<f64> {
    let sds = column_sds(v);
    if sds.is_empty() || sds.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidInput("instrument has a constant coordinate; give a bandwidth scale".into()));
    }
    Ok((sds.iter().map(|s| s.ln()).sum::<f64>() / sds.len() as f64).exp())
}

/// Normalised kernel weights of the training rows at one query point.
fn weights(train: &DMatrix<f64>, query: &[f64], kernel: &KernelSpec, skip: Option<usize>, row: usize) -> Result<Vec<f64>> {
    let n = train.nrows();
    let mut logw = vec![f64::NEG_INFINITY; n];
    let mut top = f64::NEG_INFINITY;
    for (k, lw) in logw.iter_mut().enumerate() {
        if Some(k) == skip {
            continue;
        }
        let sq: f64 = query.iter().enumerate().map(|(j, q)| (train[(k, j)] - q).powi(2)).sum();
        *lw = kernel.log_weight(sq);
        top = top.max(*lw);
    }
    if !(top >= LN_UNDERFLOW) {
        return Err(Error::KernelUnderflow(Some(row)));
    }
    let mut w: Vec<f64> = logw.iter().map(|lw| (lw - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Nadaraya–Watson fit of each column of `m` (rows aligned with `v_train`)
/// evaluated at the rows of `v_query`. Rows are processed in parallel; each
/// row's sums run in a fixed order, so the output does not depend on the
/// thread count.
pub fn nw_smooth(
    m: &DMatrix<f64>,
    v_train: &DMatrix<f64>,
    v_query: &DMatrix<f64>,
    kernel: &KernelSpec,
) -> Result<DMatrix<f64>> {
    smooth_impl(m, v_train, v_query, kernel, false)
}

pub(crate) fn smooth_impl(
    m: &DMatrix<f64>,
    v_train: &DMatrix<f64>,
    v_query: &DMatrix<f64>,
    kernel: &KernelSpec,
    in_sample: bool,
) -> Result<DMatrix<f64>> {
    if m.nrows() != v_train.nrows() {
        return Err(Error::Dimension(format!(
            "{} values but {} instrument rows",
            m.nrows(),
            v_train.nrows()
        )));
    }
    if v_train.ncols() != kernel.dim || v_query.ncols() != kernel.dim {
        return Err(Error::Dimension(format!(
            "kernel dimension {} but instruments have {} and {} columns",
            kernel.dim,
            v_train.ncols(),
            v_query.ncols()
        )));
    }
    let cols = m.ncols();
    let rows: Vec<Vec<f64>> = (0..v_query.nrows())
        .into_par_iter()
        .map(|i| {
            let q: Vec<f64> = v_query.row(i).iter().copied().collect();
            let skip = (in_sample && kernel.leave_one_out).then_some(i);
            let w = weights(v_train, &q, kernel, skip, i)?;
            Ok((0..cols)
                .map(|c| w.iter().zip(m.column(c).iter()).map(|(a, b)| a * b).sum())
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(v_query.nrows(), cols, |r, c| rows[r][c]))
}

/// `M_i − Σ_k M_k w_ik / Σ_k w_ik` for every row `i`.
pub fn nw_residualize(m: &DMatrix<f64>, v: &DMatrix<f64>, kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    Ok(m - smooth_impl(m, v, v, kernel, true)?)
}

/// Nadaraya–Watson regression of `Y − θ'Z` on `V`, evaluated at `v_query`.
pub fn estimate_g(
    theta: &DVector<f64>,
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    v: &DMatrix<f64>,
    kernel: &KernelSpec,
    v_query: &[f64],
) -> Result<f64> {
    let partial = y - z * theta;
    let query = DMatrix::from_row_slice(1, v_query.len(), v_query);
    let m = DMatrix::from_column_slice(partial.len(), 1, partial.as_slice());
    Ok(nw_smooth(&m, v, &query, kernel)?[(0, 0)])
}
