//! Instrument construction `V = (α'U/ρ, W')'` with `W = A Z*` and
//! `Z* = (Z', U^{(1..d)})'`.
//!
//! `A` comes either from the leading eigenvectors of the thresholded moment
//! matrix `Ω̂ = Ĉ'Ĉ` ([`compute_a_eigen`]) or, for `d = 1`, from the ridge
//! row-vector approximation ([`compute_a_row`]).

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{
    center_columns, column_means, correlation, covariance, inv_sqrt_spd, max_gram_eigenvalue,
    select_columns, sym_eigen_desc,
};
use crate::{Error, Result};

/// Exhaustive sign search is used up to this many coordinates of `Z*`.
const EXHAUSTIVE_SIGN_LIMIT: usize = 13;

#[derive(Debug, Clone)]
pub struct OmegaEstimate {
    pub omega_hat: DMatrix<f64>,
    pub eigvals: DVector<f64>,
    pub q1: DMatrix<f64>,
}

impl OmegaEstimate {
    /// `Ω = C'C` from an `l × (q+d)` cross-moment matrix `C`.
    pub fn from_cross_moments(c: &DMatrix<f64>, d: usize) -> Result<Self> {
        let k = c.ncols();
        if d == 0 || d > k {
            return Err(Error::InvalidInput(format!("d = {d} must lie in 1..={k}")));
        }
        let omega_hat = c.tr_mul(c);
        let (eigvals, vecs) = sym_eigen_desc(&omega_hat);
        let top = eigvals[0].max(0.0);
        let positive = eigvals.iter().filter(|&&v| v > 1e-12 * top.max(f64::MIN_POSITIVE)).count();
        if positive < d {
            warn!("rank deficiency; instruments may be uninformative ({positive} of {d} eigenvalues positive)");
        }
        let q1 = vecs.columns(0, d).into_owned();
        Ok(Self { omega_hat, eigvals, q1 })
    }

    /// Orthogonal projector onto the row space of `C` (the `Σ⁺Σ` of the row-vector method).
    pub fn row_space_projector(&self) -> DMatrix<f64> {
        let (vals, vecs) = sym_eigen_desc(&self.omega_hat);
        let top = vals[0].max(0.0);
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-10 * top && top > 0.0).collect();
        let q = select_columns(&vecs, &keep);
        &q * q.transpose()
    }
}

/// Thresholded cross moments between the columns of `u` and `z_star`, both
/// assumed centred: entries with `|m̂| ≤ 1/√n` are set to zero.
pub fn thresholded_cross_moments(u: &DMatrix<f64>, z_star: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.nrows() as f64;
    let cut = 1.0 / n.sqrt();
    (u.tr_mul(z_star) / n).map(|m| if m.abs() > cut { m } else { 0.0 })
}

fn augment(z: &DMatrix<f64>, u: &DMatrix<f64>, star: &[usize]) -> DMatrix<f64> {
    let q = z.ncols();
    DMatrix::from_fn(z.nrows(), q + star.len(), |r, c| {
        if c < q {
            z[(r, c)]
        } else {
            u[(r, star[c - q])]
        }
    })
}

/// `Ω̂` with `Z* = (Z, U[:, 0..d])`; inputs are centred here.
pub fn estimate_omega(z: &DMatrix<f64>, u: &DMatrix<f64>, d: usize) -> Result<OmegaEstimate> {
    if z.nrows() != u.nrows() {
        return Err(Error::Dimension(format!("Z has {} rows, U has {}", z.nrows(), u.nrows())));
    }
    if d == 0 || d > u.ncols() {
        return Err(Error::InvalidInput(format!(
            "d = {d} must lie in 1..={} (columns of U)",
            u.ncols()
        )));
    }
    let star: Vec<usize> = (0..d).collect();
    let z_star = center_columns(&augment(z, u, &star));
    let uc = center_columns(u);
    OmegaEstimate::from_cross_moments(&thresholded_cross_moments(&uc, &z_star), d)
}

pub fn compute_a_eigen(omega: &OmegaEstimate) -> DMatrix<f64> {
    omega.q1.transpose()
}

/// Ridge row-vector approximation of `A` for `d = 1`.
///
/// `Â_k = D_k G (G + c_k I)⁻¹` with `G = Z*'Z*/n`; the magnitudes `‖Â_k‖`
/// are signed by minimising `Q(a) = Σ_k (a_k a − D_k) G (a_k a − D_k)'` over
/// unit vectors, after rescaling `D` to unit spectral norm.
pub fn compute_a_row(z_star: &DMatrix<f64>, d_mat: &DMatrix<f64>, c_ridge: &[f64]) -> Result<DVector<f64>> {
    let k = z_star.ncols();
    if d_mat.shape() != (k, k) || c_ridge.len() != k {
        return Err(Error::Dimension(format!(
            "Z* has {k} columns, D is {}×{}, c has {} entries",
            d_mat.nrows(),
            d_mat.ncols(),
            c_ridge.len()
        )));
    }
    if c_ridge.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::InvalidInput("ridge constants must be positive".into()));
    }
    let g = z_star.tr_mul(z_star) / z_star.nrows().max(1) as f64;
    let scale = d_mat.clone().svd(false, false).singular_values.max();
    if !(scale > 0.0) {
        return Err(Error::Numerical("instrument direction undetermined".into()));
    }
    let d_unit = d_mat / scale;

    let mut mags = DVector::zeros(k);
    for (i, &c) in c_ridge.iter().enumerate() {
        let ridge = &g + DMatrix::identity(k, k) * c;
        let inv = ridge
            .try_inverse()
            .ok_or_else(|| Error::Numerical("G + cI is singular".into()))?;
        mags[i] = (d_unit.row(i) * &g * inv).norm();
    }
    let total = mags.norm();
    if !(total > 1e-300) {
        return Err(Error::Numerical("instrument direction undetermined".into()));
    }
    let mags = mags / total;

    let dg = &d_unit * &g;
    let objective = |a: &DVector<f64>| -> f64 { (a.transpose() * &g * a)[0] - 2.0 * (a.transpose() * &dg * a)[0] };
    let signed = |mask: u64| DVector::from_fn(k, |i, _| if mask >> i & 1 == 1 { -mags[i] } else { mags[i] });

    let a = if k <= EXHAUSTIVE_SIGN_LIMIT {
        // Q(a) = Q(−a), so the first sign is pinned to +.
        let mut best = (objective(&signed(0)), 0u64);
        for mask in (2..1u64 << k).filter(|m| m & 1 == 0) {
            let v = objective(&signed(mask));
            if v < best.0 - 1e-14 * best.0.abs().max(1.0) {
                best = (v, mask);
            }
        }
        signed(best.1)
    } else {
        let mut mask = 0u64;
        let mut current = objective(&signed(mask));
        loop {
            let mut improved = false;
            for i in 1..k {
                let trial = mask ^ (1 << i);
                let v = objective(&signed(trial));
                if v < current - 1e-14 * current.abs().max(1.0) {
                    mask = trial;
                    current = v;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        signed(mask)
    };
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StarSelection {
    /// The `d` columns of `U` most correlated (in absolute value) with the Dantzig residual.
    #[default]
    ResidualCorrelation,
    /// The first `d` columns of `U`.
    FirstD,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum AMethod {
    #[default]
    Eigen,
    /// Row-vector approximation with a common ridge constant (requires `d = 1`).
    Row(f64),
}

/// Picks the columns of `U` that enter `Z*`.
pub fn choose_star_columns(
    u: &DMatrix<f64>,
    residual: Option<&DVector<f64>>,
    d: usize,
    mode: StarSelection,
) -> Result<Vec<usize>> {
    if d == 0 || d > u.ncols() {
        return Err(Error::InvalidInput(format!(
            "d = {d} must lie in 1..={} (columns of U)",
            u.ncols()
        )));
    }
    match (mode, residual) {
        (StarSelection::FirstD, _) | (StarSelection::ResidualCorrelation, None) => Ok((0..d).collect()),
        (StarSelection::ResidualCorrelation, Some(r)) => {
            if r.len() != u.nrows() {
                return Err(Error::Dimension("residual length differs from rows of U".into()));
            }
            let score: Vec<f64> = u
                .column_iter()
                .map(|c| correlation(c.as_slice(), r.as_slice()).map_or(0.0, f64::abs))
                .collect();
            let mut order: Vec<usize> = (0..u.ncols()).collect();
            order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
            order.truncate(d);
            Ok(order)
        }
    }
}

/// Everything needed to rebuild `V` on new rows of `(Z, U)`.
#[derive(Debug, Clone)]
pub struct InstrumentPlan {
    /// `d × (q+d)` with unit-norm rows, acting on raw `Z*`.
    pub a: DMatrix<f64>,
    pub d: usize,
    pub alpha: DVector<f64>,
    pub rho_scale: f64,
    pub lambda_m: f64,
    /// 0-based columns of `U` placed in `Z*`, in order.
    pub star_cols: Vec<usize>,
    /// `n × (d+1)` instrument sample.
    pub v: DMatrix<f64>,
    /// Eigenvalues of `Ω̂` when `A` came from the eigen route.
    pub omega_eigvals: Option<DVector<f64>>,
}

impl InstrumentPlan {
    pub fn z_star(&self, z: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        augment(z, u, &self.star_cols)
    }

    /// `V` on new data using the frozen `A`, `α`, `ρ`.
    pub fn instrument(&self, z: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if u.ncols() != self.alpha.len() || z.ncols() + self.d != self.a.ncols() || z.nrows() != u.nrows() {
            return Err(Error::Dimension(format!(
                "plan expects Z with {} and U with {} columns, got {}×{} and {}×{}",
                self.a.ncols() - self.d,
                self.alpha.len(),
                z.nrows(),
                z.ncols(),
                u.nrows(),
                u.ncols()
            )));
        }
        let first = u * &self.alpha / self.rho_scale;
        let w = self.z_star(z, u) * self.a.transpose();
        let mut v = DMatrix::zeros(z.nrows(), self.d + 1);
        v.set_column(0, &first);
        v.columns_mut(1, self.d).copy_from(&w);
        Ok(v)
    }

    /// Plain-text block describing the plan (indices 1-based).
    pub fn report(&self) -> String {
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ");
        let mut out = String::from("[instruments]\n");
        out += &format!("d = {}\n", self.d);
        let cols: Vec<String> = self.star_cols.iter().map(|c| (c + 1).to_string()).collect();
        out += &format!("star_columns_of_U = [{}]\n", cols.join(", "));
        out += &format!("rho = {:.6e}\nlambda_M = {:.6e}\n", self.rho_scale, self.lambda_m);
        out += &format!("alpha_norm = {:.6e}\n", self.alpha.norm());
        for (i, row) in self.a.row_iter().enumerate() {
            let r: Vec<f64> = row.iter().copied().collect();
            out += &format!("A[{}] = [{}]\n", i + 1, fmt(&r));
        }
        if let Some(e) = &self.omega_eigvals {
            out += &format!("omega_eigenvalues = [{}]\n", fmt(e.as_slice()));
        }
        out
    }
}

/// Assembles `V` for `Z* = (Z, U[:, star_cols])` with the given `A` and `α`.
pub fn build_instrument_v(
    z: &DMatrix<f64>,
    u: &DMatrix<f64>,
    star_cols: &[usize],
    a: &DMatrix<f64>,
    alpha: &DVector<f64>,
) -> Result<InstrumentPlan> {
    let d = a.nrows();
    if d != star_cols.len() || a.ncols() != z.ncols() + d || alpha.len() != u.ncols() || z.nrows() != u.nrows()
    {
        return Err(Error::Dimension(format!(
            "A is {}×{}, Z has {} columns, U has {}, α has {} entries, {} star columns",
            a.nrows(),
            a.ncols(),
            z.ncols(),
            u.ncols(),
            alpha.len(),
            star_cols.len()
        )));
    }
    if star_cols.iter().any(|&c| c >= u.ncols()) {
        return Err(Error::InvalidInput("star column index outside U".into()));
    }
    for row in a.row_iter() {
        if (row.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput("rows of A must have unit length".into()));
        }
    }
    let alpha_norm = alpha.norm();
    if !(alpha_norm > 0.0) {
        return Err(Error::InvalidInput("α must be nonzero".into()));
    }
    let lambda_m = max_gram_eigenvalue(u);
    let rho_scale = alpha_norm * lambda_m.sqrt();
    if !(rho_scale > 0.0) {
        return Err(Error::Numerical("U has no spread; ρ would be zero".into()));
    }
    let mut plan = InstrumentPlan {
        a: a.clone(),
        d,
        alpha: alpha.clone(),
        rho_scale,
        lambda_m,
        star_cols: star_cols.to_vec(),
        v: DMatrix::zeros(0, 0),
        omega_eigvals: None,
    };
    plan.v = plan.instrument(z, u)?;
    Ok(plan)
}

/// Full data-driven construction: choose `Z*`, whiten it, estimate `A` on
/// the whitened scale, map `A` back to raw `Z*`, and build `V`.
pub fn plan_instruments(
    z: &DMatrix<f64>,
    u: &DMatrix<f64>,
    alpha: &DVector<f64>,
    d: usize,
    star_cols: &[usize],
    method: AMethod,
) -> Result<InstrumentPlan> {
    if star_cols.len() != d {
        return Err(Error::InvalidInput(format!("{} star columns for d = {d}", star_cols.len())));
    }
    let z_star = augment(z, u, star_cols);
    let whiten = inv_sqrt_spd(&covariance(&z_star))?;
    let zw = center_columns(&z_star) * &whiten;
    let uc = center_columns(u);
    let omega = OmegaEstimate::from_cross_moments(&thresholded_cross_moments(&uc, &zw), d)?;
    let a_white = match method {
        AMethod::Eigen => compute_a_eigen(&omega),
        AMethod::Row(c) => {
            if d != 1 {
                return Err(Error::InvalidInput("row-vector method requires d = 1".into()));
            }
            let proj = omega.row_space_projector();
            let c_ridge = vec![c; zw.ncols()];
            let row = compute_a_row(&zw, &proj, &c_ridge)?;
            DMatrix::from_row_slice(1, row.len(), row.as_slice())
        }
    };
    let a = orthonormal_rows(&(a_white * &whiten))?;
    let mut plan = build_instrument_v(z, u, star_cols, &a, alpha)?;
    plan.omega_eigvals = Some(omega.eigvals);
    Ok(plan)
}

/// Same row space as `m`, orthonormal rows; each row keeps the sign of its
/// projection onto the corresponding input row.
fn orthonormal_rows(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qr = m.transpose().qr();
    let r = qr.r();
    let top = r.diagonal().amax();
    if !(top > 0.0) || r.diagonal().iter().any(|v| v.abs() <= 1e-12 * top) {
        return Err(Error::Numerical("instrument direction undetermined".into()));
    }
    let mut q = qr.q().transpose();
    for (i, mut row) in q.row_iter_mut().enumerate() {
        if r[(i, i)] < 0.0 {
            row.neg_mut();
        }
    }
    Ok(q)
}

/// Sample means of `Z*` (handy for diagnostics on the centred scale).
pub fn z_star_means(z: &DMatrix<f64>, u: &DMatrix<f64>, star_cols: &[usize]) -> DVector<f64> {
    column_means(&augment(z, u, star_cols))
}
