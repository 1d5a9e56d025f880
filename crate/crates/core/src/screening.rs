//! Sure independence screening by absolute marginal correlation.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::linalg::correlation;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenResult {
    /// Sorted 0-based indices of the retained columns.
    pub kept: Vec<usize>,
    /// `|corr(x_j, Y)|` for every column (0 for constant columns).
    pub scores: Vec<f64>,
}

pub fn default_keep(n: usize) -> usize {
    n.saturating_sub(1).max(1)
}

pub fn sis_screen(x: &DMatrix<f64>, y: &DVector<f64>, d_keep: usize) -> Result<ScreenResult> {
    if d_keep == 0 {
        return Err(Error::InvalidInput("d_keep must be at least 1".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::Dimension(format!("X has {} rows, Y has {}", x.nrows(), y.len())));
    }
    let ys = y.as_slice();
    if correlation(ys, ys).is_none() {
        return Err(Error::InvalidInput("response is constant; nothing to screen against".into()));
    }
    let scores: Vec<f64> = (0..x.ncols())
        .into_par_iter()
        .map(|j| correlation(x.column(j).as_slice(), ys).map(f64::abs))
        .collect::<Vec<_>>()
        .into_iter()
        .enumerate()
        .map(|(j, s)| {
            s.unwrap_or_else(|| {
                warn!("column {} is constant; screening score set to 0", j + 1);
                0.0
            })
        })
        .collect();

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order.into_iter().take(d_keep).collect();
    kept.sort_unstable();
    Ok(ScreenResult { kept, scores })
}
