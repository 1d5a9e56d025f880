//! Dense two-phase simplex for `min c'w  s.t.  A w ≤ b` (optionally `w ≥ 0`).
//!
//! Pricing is largest-coefficient until a run of degenerate pivots is seen,
//! after which the phase switches permanently to Bland's rule (lowest-index
//! entering column, lowest-index leaving basic variable on ratio ties), which
//! guarantees termination.
//!
//! The final basis is re-solved against the original (row-scaled) constraint
//! matrix with an LU factorisation, so the returned vertex and duals do not
//! carry the rounding accumulated over the pivots.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Consecutive degenerate pivots tolerated before falling back to Bland's rule.
const DEGENERATE_STREAK: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_ub: DMatrix<f64>,
    pub b_ub: Vec<f64>,
    pub nonneg: bool,
}

impl LinearProgram {
    pub fn new(c: Vec<f64>, a_ub: DMatrix<f64>, b_ub: Vec<f64>, nonneg: bool) -> Result<Self> {
        let lp = Self { c, a_ub, b_ub, nonneg };
        lp.validate()?;
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b_ub.len()
    }

    fn validate(&self) -> Result<()> {
        if self.a_ub.ncols() != self.c.len() || self.a_ub.nrows() != self.b_ub.len() {
            return Err(Error::Dimension(format!(
                "A_ub is {}×{}, c has {} entries, b_ub has {}",
                self.a_ub.nrows(),
                self.a_ub.ncols(),
                self.c.len(),
                self.b_ub.len()
            )));
        }
        if self.c.iter().chain(self.b_ub.iter()).chain(self.a_ub.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("linear program has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn default_max_iter(&self) -> usize {
        50 * (self.num_vars() + self.num_constraints()).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub w: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    /// Multipliers `y ≤ 0` of the inequality rows at the final basis; the dual
    /// program is `max b'y  s.t.  A'y ≤ c` (`= c` for free variables).
    pub duals: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, pivots: usize) -> Self {
        Self {
            w: Vec::new(),
            objective: f64::NAN,
            status,
            duals: Vec::new(),
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective `b'y` at the final basis.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        self.duals.iter().zip(&lp.b_ub).map(|(y, b)| y * b).sum()
    }
}

pub fn solve_lp(lp: &LinearProgram, tol: f64, max_iter: usize) -> Result<LpSolution> {
    lp.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be positive, got {tol}")));
    }
    Tableau::build(lp, tol).run(lp, max_iter)
}

enum Outcome {
    Optimal,
    Unbounded,
    IterLimit,
}

struct Tableau {
    m: usize,
    n_struct: usize,
    n_art: usize,
    /// Row-major `m × (cols + 1)`; the last column holds the right-hand side.
    t: Vec<f64>,
    width: usize,
    /// Reduced costs, plus `−objective` in the last slot.
    cost: Vec<f64>,
    basis: Vec<usize>,
    row_scale: Vec<f64>,
    /// Scaled constraint matrix `[A_s | I]` without sign flips, for the final re-solve.
    scaled_a: DMatrix<f64>,
    scaled_b: Vec<f64>,
    struct_cost: Vec<f64>,
    tol: f64,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram, tol: f64) -> Self {
        let m = lp.num_constraints();
        let nv = lp.num_vars();
        let n_struct = if lp.nonneg { nv } else { 2 * nv };

        let mut scaled_a = DMatrix::zeros(m, n_struct);
        let mut scaled_b = vec![0.0; m];
        let mut row_scale = vec![1.0; m];
        for i in 0..m {
            let rmax = lp.a_ub.row(i).amax();
            let s = if rmax > 0.0 { rmax } else { 1.0 };
            row_scale[i] = s;
            for j in 0..nv {
                let a = lp.a_ub[(i, j)] / s;
                scaled_a[(i, j)] = a;
                if !lp.nonneg {
                    scaled_a[(i, nv + j)] = -a;
                }
            }
            scaled_b[i] = lp.b_ub[i] / s;
        }
        let struct_cost: Vec<f64> = if lp.nonneg {
            lp.c.clone()
        } else {
            lp.c.iter().copied().chain(lp.c.iter().map(|c| -c)).collect()
        };

        let negative_rows: Vec<usize> = (0..m).filter(|&i| scaled_b[i] < 0.0).collect();
        let n_art = negative_rows.len();
        let cols = n_struct + m + n_art;
        let width = cols + 1;
        let mut t = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let mut art = 0;
        for i in 0..m {
            let sign = if scaled_b[i] < 0.0 { -1.0 } else { 1.0 };
            let row = &mut t[i * width..(i + 1) * width];
            for j in 0..n_struct {
                row[j] = sign * scaled_a[(i, j)];
            }
            row[n_struct + i] = sign;
            row[cols] = sign * scaled_b[i];
            if sign < 0.0 {
                row[n_struct + m + art] = 1.0;
                basis[i] = n_struct + m + art;
                art += 1;
            } else {
                basis[i] = n_struct + i;
            }
        }

        Self {
            m,
            n_struct,
            n_art,
            t,
            width,
            cost: vec![0.0; width],
            basis,
            row_scale,
            scaled_a,
            scaled_b,
            struct_cost,
            tol,
            pivots: 0,
        }
    }

    fn cols(&self) -> usize {
        self.width - 1
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n_struct + self.m
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width + self.cols()]
    }

    /// Loads cost vector `c` (indexed by column) and prices out the basis.
    fn set_costs(&mut self, c: &[f64]) {
        let w = self.width;
        self.cost.iter_mut().for_each(|v| *v = 0.0);
        self.cost[..c.len()].copy_from_slice(c);
        for i in 0..self.m {
            let cb = c.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                let row = &self.t[i * w..(i + 1) * w];
                for (cj, rj) in self.cost.iter_mut().zip(row) {
                    *cj -= cb * rj;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, s: usize) {
        let w = self.width;
        let piv = self.t[r * w + s];
        {
            let row = &mut self.t[r * w..(r + 1) * w];
            row.iter_mut().for_each(|v| *v /= piv);
            row[s] = 1.0;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + s];
            if f != 0.0 {
                let row = &mut self.t[i * w..(i + 1) * w];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[s] = 0.0;
            }
        }
        let f = self.cost[s];
        if f != 0.0 {
            for (v, p) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.cost[s] = 0.0;
        }
        self.basis[r] = s;
        self.pivots += 1;
    }

    fn simplex(&mut self, allow_artificial: bool, max_iter: usize) -> Outcome {
        let w = self.width;
        let cols = self.cols();
        let mut bland = false;
        let mut degenerate = 0usize;
        loop {
            let candidates = (0..cols).filter(|&j| allow_artificial || !self.is_artificial(j));
            let entering = if bland {
                candidates.into_iter().find(|&j| self.cost[j] < -self.tol)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in candidates {
                    let d = self.cost[j];
                    if d < -self.tol && best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((j, d));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(s) = entering else {
                return Outcome::Optimal;
            };
            if self.pivots >= max_iter {
                return Outcome::IterLimit;
            }

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[i * w + s];
                if a > self.tol {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= self.tol * (1.0 + br.abs());
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Outcome::Unbounded;
            };

            if ratio <= self.tol {
                degenerate += 1;
                if degenerate >= DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, s);
        }
    }

    /// Pivots every artificial still basic (at level zero) out of the basis.
    fn expel_artificials(&mut self) {
        let w = self.width;
        let real_cols = self.n_struct + self.m;
        for i in 0..self.m {
            if !self.is_artificial(self.basis[i]) {
                continue;
            }
            let row = &self.t[i * w..i * w + real_cols];
            let best = row
                .iter()
                .enumerate()
                .filter(|(j, _)| !self.basis.contains(j))
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
            if let Some((j, v)) = best {
                if v.abs() > 1e-12 {
                    self.pivot(i, j);
                }
            }
        }
    }

    fn run(mut self, lp: &LinearProgram, max_iter: usize) -> Result<LpSolution> {
        if self.n_art > 0 {
            let mut c1 = vec![0.0; self.cols()];
            for j in self.n_struct + self.m..self.cols() {
                c1[j] = 1.0;
            }
            self.set_costs(&c1);
            match self.simplex(true, max_iter) {
                Outcome::IterLimit => return Ok(LpSolution::without_point(LpStatus::IterLimit, self.pivots)),
                Outcome::Unbounded => {
                    return Err(Error::Numerical("phase-one simplex reported unbounded".into()))
                }
                Outcome::Optimal => {}
            }
            let infeasibility = -self.cost[self.cols()];
            let bmax = self.scaled_b.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            if infeasibility > 10.0 * self.tol * (1.0 + bmax) {
                return Ok(LpSolution::without_point(LpStatus::Infeasible, self.pivots));
            }
            self.expel_artificials();
        }

        let c2 = self.struct_cost.clone();
        self.set_costs(&c2);
        match self.simplex(false, max_iter) {
            Outcome::IterLimit => return Ok(LpSolution::without_point(LpStatus::IterLimit, self.pivots)),
            Outcome::Unbounded => return Ok(LpSolution::without_point(LpStatus::Unbounded, self.pivots)),
            Outcome::Optimal => {}
        }

        let (x, y) = self.basic_solution();
        let nv = lp.num_vars();
        let w: Vec<f64> = if lp.nonneg {
            x[..nv].to_vec()
        } else {
            (0..nv).map(|j| x[j] - x[nv + j]).collect()
        };
        let objective = w.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
        let duals = y.iter().zip(&self.row_scale).map(|(v, s)| v / s).collect();
        Ok(LpSolution {
            w,
            objective,
            status: LpStatus::Optimal,
            duals,
            pivots: self.pivots,
        })
    }

    /// Structural+slack values and row duals of the final basis, re-solved
    /// against the scaled system; falls back to tableau values when the basis
    /// matrix cannot be factorised.
    fn basic_solution(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.m;
        let n_real = self.n_struct + m;
        let column = |j: usize| -> DVector<f64> {
            if j < self.n_struct {
                self.scaled_a.column(j).into_owned()
            } else {
                let mut e = DVector::zeros(m);
                e[j - self.n_struct] = 1.0;
                e
            }
        };
        let tableau_values = || {
            let mut x = vec![0.0; n_real];
            for i in 0..m {
                if self.basis[i] < n_real {
                    x[self.basis[i]] = self.rhs(i).max(0.0);
                }
            }
            let y: Vec<f64> = (0..m).map(|i| -self.cost[self.n_struct + i]).collect();
            (x, y)
        };
        if m == 0 {
            return (vec![0.0; n_real], Vec::new());
        }
        if self.basis.iter().any(|&j| j >= n_real) {
            return tableau_values();
        }

        let mut b = DMatrix::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            b.set_column(k, &column(j));
        }
        let lu = b.clone().lu();
        let rhs = DVector::from_column_slice(&self.scaled_b);
        let c_b = DVector::from_iterator(
            m,
            self.basis.iter().map(|&j| self.struct_cost.get(j).copied().unwrap_or(0.0)),
        );
        let (Some(xb), Some(y)) = (lu.solve(&rhs), b.transpose().lu().solve(&c_b)) else {
            return tableau_values();
        };
        if xb.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return tableau_values();
        }
        let mut x = vec![0.0; n_real];
        for (k, &j) in self.basis.iter().enumerate() {
            x[j] = xb[k].max(0.0);
        }
        (x, y.iter().copied().collect())
    }
}
