#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Brute-force `min c'w s.t. A w ≤ b, w ≥ 0` by visiting every basic
/// solution. `None` when no vertex is feasible.
pub fn vertex_enumeration(c: &[f64], a: &DMatrix<f64>, b: &[f64]) -> Option<f64> {
    let nv = c.len();
    let m = b.len();
    // All constraints as rows g'w ≤ h: the m inequalities then −w_j ≤ 0.
    let total = m + nv;
    let row = |k: usize| -> (Vec<f64>, f64) {
        if k < m {
            ((0..nv).map(|j| a[(k, j)]).collect(), b[k])
        } else {
            let mut g = vec![0.0; nv];
            g[k - m] = -1.0;
            (g, 0.0)
        }
    };
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..nv).collect();
    loop {
        let mut mat = DMatrix::zeros(nv, nv);
        let mut rhs = DVector::zeros(nv);
        for (r, &k) in subset.iter().enumerate() {
            let (g, h) = row(k);
            for j in 0..nv {
                mat[(r, j)] = g[j];
            }
            rhs[r] = h;
        }
        let lu = mat.clone().lu();
        if mat.determinant().abs() > 1e-10 {
            if let Some(w) = lu.solve(&rhs) {
                let feasible = (0..total).all(|k| {
                    let (g, h) = row(k);
                    g.iter().zip(w.iter()).map(|(x, y)| x * y).sum::<f64>() <= h + 1e-9
                });
                if feasible {
                    let obj: f64 = c.iter().zip(w.iter()).map(|(x, y)| x * y).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
        }
        if !next_subset(&mut subset, total) {
            break;
        }
    }
    best
}

/// Advances a sorted k-subset of 0..n in lexicographic order.
pub fn next_subset(s: &mut [usize], n: usize) -> bool {
    let k = s.len();
    for i in (0..k).rev() {
        if s[i] < n - k + i {
            s[i] += 1;
            for j in i + 1..k {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// `n × p` matrix with orthonormal columns (`p ≤ n`).
pub fn random_orthonormal<R: Rng>(rng: &mut R, n: usize, p: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, n, p).qr().q()
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Ordinary least squares through the normal equations, with standard errors.
pub fn ols_with_se(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let (n, k) = x.shape();
    let xtx_inv = x.tr_mul(x).try_inverse().expect("full rank design");
    let coef = &xtx_inv * x.tr_mul(y);
    let resid = y - x * &coef;
    let s2 = resid.norm_squared() / (n - k) as f64;
    let se = DVector::from_fn(k, |j, _| (s2 * xtx_inv[(j, j)]).sqrt());
    (coef, se)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
