use postdantzig::bench::{emit_table, parse_csv_table, run_experiment, RepOutcome, TableFormat};
use postdantzig::config::ExperimentConfig;

const NOISELESS: &str = r#"
n = 30
p = 40
S = 3
beta_type = "I"
beta_I = [1.0, -1.5, 2.0]
I = [2, 5, 11]
tail_low = -1.0
tail_high = 0.0
rho_corr = 0.1
sigma_eps = 0.0
reps = 1
holdout_n = 50
seed = 3
"#;

#[test]
fn noiseless_sparse_truth_is_recovered() {
    let cfg = ExperimentConfig::from_toml_str(NOISELESS).unwrap();
    let report = run_experiment(&cfg, Some(1)).unwrap();
    let m = match &report.records[0].outcome {
        RepOutcome::Ok(m) => m,
        RepOutcome::Failed(tag) => panic!("rep failed: {tag}"),
    };
    assert_eq!(m.selected, vec![1, 4, 10]);
    assert!(m.mse_hat <= 1e-6, "MSE(θ̂) = {}", m.mse_hat);
    for pe in [m.pe_full, m.pe_sub, m.pe_ols] {
        assert!(pe <= 1e-6, "PE = {pe}");
    }
}

fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml_str(
        r#"
n = 40
p = 60
S = 7
beta_type = "I"
rho_corr = 0.1
target_r2 = 0.98
varsigma = 0.5
reps = 6
holdout_n = 40
seed = 99
"#,
    )
    .unwrap();
    c.id = Some("small".into());
    c
}

#[test]
fn same_seed_gives_identical_tables() {
    let cfg = small_config();
    let a = run_experiment(&cfg, Some(1)).unwrap();
    let b = run_experiment(&cfg, Some(3)).unwrap();
    for fmt in [TableFormat::Csv, TableFormat::Markdown] {
        assert_eq!(emit_table(std::slice::from_ref(&a), fmt), emit_table(std::slice::from_ref(&b), fmt));
    }
    assert_eq!(a.records, b.records);
}

#[test]
fn aggregates_are_recomputable_from_records() {
    let report = run_experiment(&small_config(), None).unwrap();
    let agg = report.aggregates.unwrap();
    let ok: Vec<_> = report.metrics().collect();
    assert_eq!(agg.reps, ok.len());
    let mean = ok.iter().map(|m| m.mse_hat).sum::<f64>() / ok.len() as f64;
    assert!((agg.mse_hat - mean).abs() < 1e-12);
    let tau = ok.iter().filter(|m| m.pe_sub < m.pe_ols).count();
    assert_eq!(agg.tau, tau);

    let rows = parse_csv_table(&emit_table(&[report], TableFormat::Csv)).unwrap();
    assert_eq!(rows[0].config_id, "small");
    assert!((rows[0].values[0] - agg.mse_hat).abs() <= 5e-5);
    assert_eq!(rows[0].tau, agg.tau);
}
