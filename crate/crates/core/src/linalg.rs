//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order; eigenvectors are the matching columns.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest eigenvalue of `U U'`, computed from whichever Gram matrix is
/// smaller (`U U'` and `U'U` share their nonzero spectrum).
pub fn max_gram_eigenvalue(u: &DMatrix<f64>) -> f64 {
    if u.nrows() == 0 || u.ncols() == 0 {
        return 0.0;
    }
    let gram = if u.ncols() <= u.nrows() {
        u.transpose() * u
    } else {
        u * u.transpose()
    };
    let (vals, _) = sym_eigen_desc(&gram);
    vals[0].max(0.0)
}

/// Least squares `argmin ‖y − Xb‖₂` through the SVD; refuses numerically
/// rank-deficient designs.
pub fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows, response has {}",
            x.nrows(),
            y.len()
        )));
    }
    if x.ncols() > x.nrows() {
        return Err(Error::RankDeficient(format!(
            "{} columns but only {} rows",
            x.ncols(),
            x.nrows()
        )));
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= smax * 1e-10 {
        return Err(Error::RankDeficient(format!(
            "singular values span [{smin:.3e}, {smax:.3e}]"
        )));
    }
    svd.solve(y, 0.0).map_err(|e| Error::Numerical(e.to_string()))
}

/// Inverse square root of a symmetric positive definite matrix.
pub fn inv_sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen_desc(m);
    let top = vals.iter().copied().fold(0.0_f64, f64::max);
    if vals.iter().any(|&v| v <= top * 1e-12) || !(top > 0.0) {
        return Err(Error::RankDeficient(
            "covariance of Z* is singular; cannot whiten".into(),
        ));
    }
    let inv_sqrt = DVector::from_iterator(vals.len(), vals.iter().map(|v| 1.0 / v.sqrt()));
    Ok(&vecs * DMatrix::from_diagonal(&inv_sqrt) * vecs.transpose())
}

pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

pub fn center_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let means = column_means(m);
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] - means[c])
}

/// Sample covariance with divisor `n`.
pub fn covariance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let c = center_columns(m);
    (c.transpose() * &c) / m.nrows().max(1) as f64
}

/// Sample standard deviation (divisor `n − 1`) of each column.
pub fn column_sds(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    m.column_iter()
        .map(|c| {
            if n < 2 {
                return 0.0;
            }
            let mean = c.sum() / n as f64;
            (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        })
        .collect()
}

pub fn select_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

/// Pearson correlation of two equal-length slices; `None` when either is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa.sqrt() * sbb.sqrt()))
}
