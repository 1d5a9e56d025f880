//! Monte Carlo harness: repeated simulate → (screen) → select → correct →
//! predict, with per-replication metrics and aggregate tables.
//!
//! `MSE` is the mean squared coefficient error over the selected
//! coordinates, `(1/|Î|) Σ_{j∈Î} (θ_j − β_j)²`. `PE` is the mean squared
//! prediction error on a fresh holdout sample drawn from the same truth.
//! `τ` counts replications where the corrected sub-model predictor beats the
//! least-squares sub-model predictor strictly.

use std::fmt::Write as _;

use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ResolvedDesign, BENCH_BANDWIDTH_SCALE};
use crate::dantzig::fit_dantzig;
use crate::datamodel::{simulate_dataset, Dataset, SubmodelSplit};
use crate::linalg::select_columns;
use crate::lpsolver::DEFAULT_TOL;
use crate::plm::{fit_post_dantzig, AlphaSource, PostDantzigOptions};
use crate::rng::derive_seed;
use crate::screening::sis_screen;
use crate::{Error, Result};

/// Largest tolerated fraction of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct RepMetrics {
    pub mse_hat: f64,
    pub mse_s: f64,
    pub pe_full: f64,
    pub pe_sub: f64,
    pub pe_ols: f64,
    /// 0-based indices into the full covariate vector.
    pub selected: Vec<usize>,
    pub lambda_p: f64,
    pub alpha_source: AlphaSource,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RepOutcome {
    Ok(RepMetrics),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub outcome: RepOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub mse_hat: f64,
    pub mse_hat_std: f64,
    pub mse_s: f64,
    pub mse_s_std: f64,
    pub pe_full: f64,
    pub pe_full_std: f64,
    pub pe_sub: f64,
    pub pe_sub_std: f64,
    pub pe_ols: f64,
    pub pe_ols_std: f64,
    pub tau: usize,
    /// Successful replications behind the aggregates.
    pub reps: usize,
}

impl Aggregates {
    /// Mean and sample standard deviation (divisor `m − 1`) of each metric.
    pub fn from_records(records: &[RepRecord]) -> Option<Self> {
        let ok: Vec<&RepMetrics> = records
            .iter()
            .filter_map(|r| match &r.outcome {
                RepOutcome::Ok(m) => Some(m),
                RepOutcome::Failed(_) => None,
            })
            .collect();
        if ok.is_empty() {
            return None;
        }
        let stat = |f: fn(&RepMetrics) -> f64| mean_std(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
        let (mse_hat, mse_hat_std) = stat(|m| m.mse_hat);
        let (mse_s, mse_s_std) = stat(|m| m.mse_s);
        let (pe_full, pe_full_std) = stat(|m| m.pe_full);
        let (pe_sub, pe_sub_std) = stat(|m| m.pe_sub);
        let (pe_ols, pe_ols_std) = stat(|m| m.pe_ols);
        Some(Self {
            mse_hat,
            mse_hat_std,
            mse_s,
            mse_s_std,
            pe_full,
            pe_full_std,
            pe_sub,
            pe_sub_std,
            pe_ols,
            pe_ols_std,
            tau: ok.iter().filter(|m| m.pe_sub < m.pe_ols).count(),
            reps: ok.len(),
        })
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config_id: String,
    pub config: ExperimentConfig,
    pub beta_seed: u64,
    pub sigma_eps: f64,
    pub r2: f64,
    pub d_keep: Option<usize>,
    pub records: Vec<RepRecord>,
    pub aggregates: Option<Aggregates>,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| matches!(r.outcome, RepOutcome::Failed(_))).count()
    }

    pub fn metrics(&self) -> impl Iterator<Item = &RepMetrics> {
        self.records.iter().filter_map(|r| match &r.outcome {
            RepOutcome::Ok(m) => Some(m),
            RepOutcome::Failed(_) => None,
        })
    }
}

/// `(1/|S|) Σ_{j∈S} (θ_j − β_j)²` with `theta_est[k]` paired with `selected[k]`.
pub fn mse_against_truth(theta_est: &DVector<f64>, beta_true: &DVector<f64>, selected: &[usize]) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    if theta_est.len() != selected.len() {
        return Err(Error::Dimension(format!(
            "{} estimates for {} selected coordinates",
            theta_est.len(),
            selected.len()
        )));
    }
    if let Some(&j) = selected.iter().find(|&&j| j >= beta_true.len()) {
        return Err(Error::InvalidInput(format!("selected index {} outside β", j + 1)));
    }
    let sum: f64 = selected.iter().zip(theta_est.iter()).map(|(&j, t)| (t - beta_true[j]).powi(2)).sum();
    Ok(sum / selected.len() as f64)
}

fn pe(pred: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (y - pred).norm_squared() / y.len() as f64
}

fn failure_tag(e: &Error) -> String {
    let kind = match e {
        Error::EmptySelection => "empty_selection",
        Error::SingularSn => "singular_sn",
        Error::EmptyComplement => "empty_complement",
        Error::RankDeficient(_) => "rank_deficient",
        Error::KernelUnderflow(_) => "kernel_underflow",
        Error::Lp(_) => "lp",
        _ => "other",
    };
    format!("{kind}: {e}")
}

/// One replication with the per-rep seed `seed`.
pub fn run_rep(cfg: &ExperimentConfig, design: &ResolvedDesign, seed: u64) -> Result<RepMetrics> {
    let model = &design.model;
    let train = simulate_dataset(model, cfg.n, derive_seed(seed, 0))?;
    let holdout = simulate_dataset(model, cfg.holdout_n, derive_seed(seed, 1))?;

    let kept: Vec<usize> = if cfg.use_sis {
        sis_screen(&train.x, &train.y, cfg.effective_d_keep())?.kept
    } else {
        (0..cfg.p).collect()
    };
    let work = Dataset::new(train.y.clone(), select_columns(&train.x, &kept))?;
    let work_holdout = select_columns(&holdout.x, &kept);

    let lambda_p = cfg.lambda_mode.resolve(&work.x, derive_seed(seed, 2))?;
    let dfit = fit_dantzig(&work.x, &work.y, model.sigma_eps, lambda_p, cfg.varsigma, DEFAULT_TOL)?;
    let split = SubmodelSplit::from_selected(&dfit.active, work.p())?;
    let opts = PostDantzigOptions {
        d: cfg.d_instr,
        star: cfg.star_selection,
        bandwidth_scale: Some(cfg.bandwidth_scale.unwrap_or(BENCH_BANDWIDTH_SCALE)),
        ..PostDantzigOptions::default()
    };
    let post = fit_post_dantzig(&work, &split, &dfit, &opts)?;

    let selected: Vec<usize> = dfit.active.iter().map(|&j| kept[j]).collect();
    let mse_hat = mse_against_truth(&post.plm.theta_hat, &model.beta, &selected)?;
    let mse_s = mse_against_truth(&dfit.theta_tilde_s, &model.beta, &selected)?;
    Ok(RepMetrics {
        mse_hat,
        mse_s,
        pe_full: pe(&post.predict_full(&work_holdout)?, &holdout.y),
        pe_sub: pe(&post.predict_submodel(&work_holdout)?, &holdout.y),
        pe_ols: pe(&post.predict_ols(&work_holdout)?, &holdout.y),
        selected,
        lambda_p,
        alpha_source: post.alpha_source,
    })
}

/// Runs every replication (in parallel on `threads` workers, or the global
/// pool when `None`) and aggregates in replication order.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentReport> {
    let design = cfg.resolve()?;
    info!(
        "{}: σ_ε = {:.4}, R² = {:.4}, β seed = {}",
        cfg.label(),
        design.model.sigma_eps,
        design.r2,
        design.beta_seed
    );
    let one = |rep: usize| {
        let seed = derive_seed(cfg.seed, rep as u64 + 1);
        let outcome = match run_rep(cfg, &design, seed) {
            Ok(m) => RepOutcome::Ok(m),
            Err(e) => RepOutcome::Failed(failure_tag(&e)),
        };
        RepRecord { rep, seed, outcome }
    };
    let records: Vec<RepRecord> = match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            pool.install(|| (0..cfg.reps).into_par_iter().map(one).collect())
        }
        None => (0..cfg.reps).into_par_iter().map(one).collect(),
    };

    let failed: Vec<&RepRecord> = records
        .iter()
        .filter(|r| matches!(r.outcome, RepOutcome::Failed(_)))
        .collect();
    for r in &failed {
        if let RepOutcome::Failed(tag) = &r.outcome {
            warn!("rep {} failed: {tag}", r.rep + 1);
        }
    }
    if failed.len() as f64 > MAX_FAILURE_RATE * cfg.reps as f64 {
        let first = match &failed[0].outcome {
            RepOutcome::Failed(t) => t.clone(),
            RepOutcome::Ok(_) => unreachable!(),
        };
        return Err(Error::TooManyFailures {
            failed: failed.len(),
            reps: cfg.reps,
            first,
        });
    }
    Ok(ExperimentReport {
        config_id: cfg.label(),
        config: cfg.clone(),
        beta_seed: design.beta_seed,
        sigma_eps: design.model.sigma_eps,
        r2: design.r2,
        d_keep: cfg.use_sis.then(|| cfg.effective_d_keep()),
        aggregates: Aggregates::from_records(&records),
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "config_id",
    "mse_hat",
    "mse_hat_std",
    "mse_s",
    "mse_s_std",
    "pe_full",
    "pe_full_std",
    "pe_sub",
    "pe_sub_std",
    "pe_ols",
    "pe_ols_std",
    "tau",
    "reps",
];

const MD_HEADER: &str = "| config | MSE(θ̂) | MSE(θ̃_S) | PE(Ŷ) | PE(Ŷ_S) | PE(Ỹ_S) | τ |\n|---|---|---|---|---|---|---|\n";

/// One row per report with aggregates; reports without aggregates are skipped.
pub fn emit_table(reports: &[ExperimentReport], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out += &CSV_COLUMNS.join(",");
            out.push('\n');
        }
        TableFormat::Markdown => out += MD_HEADER,
    }
    for r in reports {
        let Some(a) = &r.aggregates else { continue };
        match format {
            TableFormat::Csv => {
                let _ = writeln!(
                    out,
                    "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{}",
                    csv_field(&r.config_id),
                    a.mse_hat,
                    a.mse_hat_std,
                    a.mse_s,
                    a.mse_s_std,
                    a.pe_full,
                    a.pe_full_std,
                    a.pe_sub,
                    a.pe_sub_std,
                    a.pe_ols,
                    a.pe_ols_std,
                    a.tau,
                    a.reps
                );
            }
            TableFormat::Markdown => {
                let _ = writeln!(
                    out,
                    "| {} | {:.4}({:.4}) | {:.4}({:.4}) | {:.4}({:.4}) | {:.4}({:.4}) | {:.4}({:.4}) | {}/{} |",
                    r.config_id.replace('|', "/"),
                    a.mse_hat,
                    a.mse_hat_std,
                    a.mse_s,
                    a.mse_s_std,
                    a.pe_full,
                    a.pe_full_std,
                    a.pe_sub,
                    a.pe_sub_std,
                    a.pe_ols,
                    a.pe_ols_std,
                    a.tau,
                    a.reps
                );
            }
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A parsed CSV table row (numbers at the emitted 4-decimal precision).
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub config_id: String,
    pub values: [f64; 10],
    pub tau: usize,
    pub reps: usize,
}

pub fn parse_csv_table(text: &str) -> Result<Vec<TableRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::InvalidInput(format!("unexpected table header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::InvalidInput(format!("bad number {:?}", &rec[i])))
        };
        let int = |i: usize| -> Result<usize> {
            rec[i].parse().map_err(|_| Error::InvalidInput(format!("bad count {:?}", &rec[i])))
        };
        let mut values = [0.0; 10];
        for (k, v) in values.iter_mut().enumerate() {
            *v = num(k + 1)?;
        }
        rows.push(TableRow {
            config_id: rec[0].to_string(),
            values,
            tau: int(11)?,
            reps: int(12)?,
        });
    }
    Ok(rows)
}

/// Header lines describing how a report was produced.
pub fn report_header(r: &ExperimentReport) -> String {
    let mut s = format!(
        "# {}: beta_seed={} sigma_eps={:.6} r2={:.6} reps={} failures={}",
        r.config_id,
        r.beta_seed,
        r.sigma_eps,
        r.r2,
        r.records.len(),
        r.failures()
    );
    if let Some(k) = r.d_keep {
        let _ = write!(s, " d_keep={k}");
    }
    s.push('\n');
    s
}
