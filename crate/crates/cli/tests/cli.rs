use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_postdantzig"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
id = "small"
n = 40
p = 60
S = 7
beta_type = "I"
rho_corr = 0.1
target_r2 = 0.98
varsigma = 0.5
reps = 8
seed = 5
"#;

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn simulated(dir: &TempDir) -> PathBuf {
    let cfg = write_config(dir, SMALL);
    let data = dir.path().join("data.csv");
    let out = run(&["simulate", "--config", path_str(&cfg), "--out", path_str(&data), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

#[test]
fn simulate_writes_header_and_rows() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir);
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("y,x1,x2,"));
    assert!(header.ends_with(",x60"));
    assert_eq!(lines.count(), 40);
}

#[test]
fn simulate_is_seed_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = std::fs::read(simulated(&dir)).unwrap();
    let b = std::fs::read(simulated(&dir)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn screen_keeps_requested_count() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir);
    let out_path = dir.path().join("kept.csv");
    let out = run(&["screen", "--data", path_str(&data), "--keep", "5", "--out", path_str(&out_path)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(out_path).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "index,score");
    assert_eq!(rows.len(), 6);
    let idx: Vec<usize> = rows[1..].iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(idx.windows(2).all(|w| w[0] < w[1]));
    assert!(idx.iter().all(|&i| (1..=60).contains(&i)));
}

#[test]
fn fit_dantzig_reports_selection() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir);
    let report = dir.path().join("dantzig.txt");
    let out = run(&[
        "fit-dantzig",
        "--data",
        path_str(&data),
        "--sigma",
        "0.2",
        "--varsigma",
        "0.5",
        "--out",
        path_str(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(report).unwrap();
    assert!(text.contains("selected = ["));
    assert!(text.contains("theta_tilde_S = ["));
    assert!(text.contains("[beta_tilde]"));
}

#[test]
fn fit_post_dantzig_reports_theta_hat() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir);
    let report = dir.path().join("post.txt");
    let out = run(&[
        "fit-post-dantzig",
        "--data",
        path_str(&data),
        "--sigma",
        "0.2",
        "--varsigma",
        "0.5",
        "--bandwidth-scale",
        "2",
        "--out",
        path_str(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(report).unwrap();
    assert!(text.contains("theta_hat = ["));
    assert!(text.contains("bandwidth_scale = 2.000000e0"));
}

#[test]
fn bench_csv_identical_across_parallelism() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, SMALL);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out_path = dir.path().join(format!("bench{threads}.csv"));
        let out = run(&[
            "bench",
            "--config",
            path_str(&cfg),
            "--out",
            path_str(&out_path),
            "--parallel",
            threads,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(out_path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.swap_remove(0)).unwrap();
    assert!(text.starts_with("config_id,mse_hat,"));
    assert!(text.lines().nth(1).unwrap().ends_with(",8"));
}

#[test]
fn bench_markdown_by_extension_and_reps_override() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, SMALL);
    let out_path = dir.path().join("bench.md");
    let out = run(&["bench", "--config", path_str(&cfg), "--out", path_str(&out_path), "--reps", "3"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(out_path).unwrap();
    assert!(text.starts_with("| config |"));
    assert!(text.trim_end().ends_with("/3 |"));
}

#[test]
fn bad_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "n = 40\np = 60\nS = 7\nbeta_type = \"I\"\nrho_corr = 0.1\ntarget_r2 = 0.98\nreps = 0\n");
    let out = run(&["bench", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let cfg = write_config(&dir, "n = 40\nunknown_key = 1\n");
    let out = run(&["bench", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_file_exits_2() {
    let out = run(&["screen", "--data", "/nonexistent/data.csv", "--keep", "3", "--out", "/tmp/never.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_selection_exits_3() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir);
    let out = run(&[
        "fit-dantzig",
        "--data",
        path_str(&data),
        "--sigma",
        "0.2",
        "--varsigma",
        "1000",
        "--out",
        path_str(&dir.path().join("r.txt")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no variables selected"));
}

#[test]
fn conflicting_lambda_flags_rejected() {
    let out = run(&[
        "fit-dantzig",
        "--data",
        "d.csv",
        "--sigma",
        "1",
        "--lambda",
        "2",
        "--lambda-gaussian",
        "5",
        "--out",
        "r.txt",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
