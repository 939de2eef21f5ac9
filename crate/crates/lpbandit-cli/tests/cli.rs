//! End-to-end tests of the lpbandit binary: exit codes, file outputs, and
//! determinism across worker counts.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lpbandit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("exp.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_GRID: &str = "\
policy = uniform
d = 2
n = 64
p = 2
c = 1
signs = all
seeds = 4
master_seed = 11
";

#[test]
fn run_meets_bound_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GRID);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stdout: {stdout}");
    assert!(stdout.contains("verdict=met"));

    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run_id,policy,d,n,p,c,delta,sign_id,seed,pseudo_regret,surrogate_bound,audit_pass,min_eig_final,kl_max"
    );
    assert_eq!(lines.count(), 16); // 4 patterns x 4 seeds
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("audits.jsonl").exists());
}

#[test]
fn oracle_policy_fails_verdict_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL_GRID.replace("policy = uniform", "policy = oracle"));
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("verdict=not met"), "stdout: {stdout}");
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write_config(dir.path(), "polcy = uniform\n");
    let out = run(&["run", "--config", bad_key.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Inadmissible grid: d > (2 n c^2)^(p/2); the diagnostic reports both
    // condition values.
    let inadmissible = write_config(
        dir.path(),
        "policy = uniform\nd = 8\nn = 4\np = 2\nc = 0.5\nseeds = 2\n",
    );
    let out = run(&["run", "--config", inadmissible.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("proof condition"), "stderr: {stderr}");
    assert!(stderr.contains("statement condition"), "stderr: {stderr}");

    let out = run(&["run", "--config", "/nonexistent/exp.cfg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_overrides_take_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GRID);
    // Oracle override flips the verdict to not-met: proves the override won.
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--policy",
        "oracle",
        "--seeds",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GRID);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out_dir, workers) in [(&out_a, "1"), (&out_b, "4")] {
        let out = run(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--workers",
            workers,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["report.csv", "report.json", "audits.jsonl"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between worker counts");
    }
}

#[test]
fn verify_lemmas_small_sweep_passes() {
    let out = run(&["verify-lemmas", "--trials", "200", "--master-seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("0 violations"), "stdout: {stdout}");
}

#[test]
fn oracle_check_small_run_passes() {
    let out = run(&["oracle-check", "--instances", "25", "--master-seed", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("max relative error"), "stdout: {stdout}");
}

#[test]
fn scaling_runs_and_reports_fits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "\
policy = uniform
d = 2
n = 64, 256, 1024, 4096
p = 2
c = 1
signs = all
seeds = 2
master_seed = 3
audit = off
",
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "scaling",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stdout: {stdout}");
    assert!(stdout.contains("fit vs n: slope"));
    assert!(stdout.contains("analytic bound slope 0.5000000000"));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("scaling.json")).unwrap())
            .unwrap();
    let slope = fit["fit_vs_n"]["slope"].as_f64().unwrap();
    assert!((slope - 0.5).abs() < 0.15, "slope {slope}");

    // Too few horizons is a config error.
    let short = write_config(
        dir.path(),
        "policy = uniform\nd = 2\nn = 64, 256\nseeds = 2\naudit = off\n",
    );
    let out = run(&["scaling", "--config", short.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
