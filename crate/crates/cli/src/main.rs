use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use postdantzig::bench::{emit_table, report_header, run_experiment, TableFormat};
use postdantzig::config::ExperimentConfig;
use postdantzig::dantzig::{fit_dantzig, DantzigFit, LambdaMode, DEFAULT_GAUSSIAN_REALIZATIONS};
use postdantzig::datamodel::{simulate_dataset, Dataset, SubmodelSplit};
use postdantzig::io::{read_dataset_path, write_dataset_path, write_index_scores};
use postdantzig::lpsolver::DEFAULT_TOL;
use postdantzig::plm::{fit_post_dantzig, PostDantzigOptions};
use postdantzig::rng::derive_seed;
use postdantzig::screening::sis_screen;
use postdantzig::{Error, Result};

#[derive(Parser)]
#[command(name = "postdantzig", version, about = "Dantzig selection with post-selection bias correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one training set from a config's design.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Master seed; overrides the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rank covariates by absolute marginal correlation and keep the top ones.
    Screen {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        keep: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dantzig selector and Gaussian refit.
    FitDantzig {
        #[command(flatten)]
        dantzig: DantzigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dantzig selection followed by the bias-corrected partially linear fit.
    FitPostDantzig {
        #[command(flatten)]
        dantzig: DantzigArgs,
        /// Number of instrument coordinates built from Z*.
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        bandwidth_scale: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo experiment; writes markdown for `.md` outputs, CSV otherwise.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        /// Worker threads (default: all cores). Output does not depend on it.
        #[arg(long)]
        parallel: Option<usize>,
    },
}

#[derive(Args)]
struct DantzigArgs {
    /// Dataset CSV with header `y,x1,...,xp`.
    #[arg(long)]
    data: PathBuf,
    /// Noise scale in the Dantzig constraint.
    #[arg(long)]
    sigma: f64,
    #[arg(long, conflicts_with = "lambda_gaussian")]
    lambda: Option<f64>,
    /// Gaussian-supremum rule with this many realizations (the default, m = 10).
    #[arg(long)]
    lambda_gaussian: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    varsigma: f64,
    /// Seed for the Gaussian-supremum draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl DantzigArgs {
    fn fit(&self) -> Result<(Dataset, DantzigFit)> {
        let data = read_dataset_path(&self.data)?;
        let mode = match (self.lambda, self.lambda_gaussian) {
            (Some(v), _) => LambdaMode::Fixed(v),
            (None, m) => LambdaMode::GaussianSup(m.unwrap_or(DEFAULT_GAUSSIAN_REALIZATIONS)),
        };
        let lambda_p = mode.resolve(&data.x, self.seed)?;
        info!("λ_p = {lambda_p:.6}");
        let fit = fit_dantzig(&data.x, &data.y, self.sigma, lambda_p, self.varsigma, DEFAULT_TOL)?;
        Ok((data, fit))
    }
}

fn dantzig_report(fit: &DantzigFit) -> String {
    let mut out = String::from("[dantzig]\n");
    let _ = writeln!(out, "lambda_p = {:.6e}", fit.lambda_p);
    let _ = writeln!(out, "sigma = {:.6e}", fit.sigma);
    let _ = writeln!(out, "varsigma = {:.6e}", fit.varsigma);
    let selected: Vec<String> = fit.active.iter().map(|j| (j + 1).to_string()).collect();
    let _ = writeln!(out, "selected = [{}]", selected.join(", "));
    let theta: Vec<String> = fit.theta_tilde_s.iter().map(|v| format!("{v:.6}")).collect();
    let _ = writeln!(out, "theta_tilde_S = [{}]", theta.join(", "));
    out += "\n[beta_tilde]\nindex,value\n";
    for (j, b) in fit.beta_tilde.iter().enumerate().filter(|(_, b)| **b != 0.0) {
        let _ = writeln!(out, "{},{b:?}", j + 1);
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, out, seed } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let design = cfg.resolve()?;
            info!("σ_ε = {:.6}, R² = {:.4}, β seed = {}", design.model.sigma_eps, design.r2, design.beta_seed);
            // Same draw as the training set of the first bench replication.
            let data = simulate_dataset(&design.model, cfg.n, derive_seed(derive_seed(cfg.seed, 1), 0))?;
            write_dataset_path(&data, &out)
        }
        Command::Screen { data, keep, out } => {
            let data = read_dataset_path(&data)?;
            let res = sis_screen(&data.x, &data.y, keep)?;
            write_index_scores(&res.kept, &res.scores, std::fs::File::create(out)?)
        }
        Command::FitDantzig { dantzig, out } => {
            let (_, fit) = dantzig.fit()?;
            write_text(&out, &dantzig_report(&fit))
        }
        Command::FitPostDantzig { dantzig, d, bandwidth_scale, out } => {
            let (data, fit) = dantzig.fit()?;
            let split = SubmodelSplit::from_selected(&fit.active, data.p())?;
            let opts = PostDantzigOptions { d, bandwidth_scale, ..PostDantzigOptions::default() };
            let post = fit_post_dantzig(&data, &split, &fit, &opts)?;
            write_text(&out, &format!("{}\n{}", dantzig_report(&fit), post.report()))
        }
        Command::Bench { config, out, reps, parallel } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(r) = reps {
                cfg.reps = r;
            }
            if parallel == Some(0) {
                return Err(Error::InvalidInput("--parallel must be at least 1".into()));
            }
            cfg.validate()?;
            let report = run_experiment(&cfg, parallel)?;
            eprint!("{}", report_header(&report));
            let format = match out.extension().and_then(|e| e.to_str()) {
                Some("md") => TableFormat::Markdown,
                _ => TableFormat::Csv,
            };
            write_text(&out, &emit_table(&[report], format))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
