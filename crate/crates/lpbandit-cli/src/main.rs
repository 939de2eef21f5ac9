//! CLI for the lpbandit laboratory: grid runs, lemma sweeps, oracle checks,
//! and scaling studies. Exit codes: 0 success, 1 verdict/audit failure,
//! 2 config error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lpbandit::harness::emit::emit;
use lpbandit::harness::sweeps::{oracle_check, verify_lemmas};
use lpbandit::harness::{run_grid, run_scaling, ExperimentConfig, ExperimentReport, Verdict};
use lpbandit::Error;

const EXIT_OK: u8 = 0;
const EXIT_VERDICT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "lpbandit", about = "Linear-bandit lower-bound laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and report per-cell lower-bound verdicts.
    Run(RunArgs),
    /// Randomized sweep of the geometric inequalities and the dual identity.
    VerifyLemmas {
        /// Trials per (d, p, c) combination.
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
    },
    /// Compare the closed-form maximizer against brute force on random instances.
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
    },
    /// Multi-horizon grid with a log-log scaling fit.
    Scaling {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value config file; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    c: Option<String>,
    /// all | sample:K
    #[arg(long)]
    signs: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    master_seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// on | off
    #[arg(long)]
    audit: Option<String>,
    /// on | off
    #[arg(long)]
    verdict: Option<String>,
    #[arg(long)]
    workers: Option<String>,
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::NumericalFailure { .. } | Error::InfeasibleAction { .. } | Error::FitUndefined(_) => {
            EXIT_NUMERICAL
        }
        _ => EXIT_CONFIG,
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    let overrides: [(&str, Option<&String>); 11] = [
        ("policy", args.policy.as_ref()),
        ("d", args.d.as_ref()),
        ("n", args.n.as_ref()),
        ("p", args.p.as_ref()),
        ("c", args.c.as_ref()),
        ("signs", args.signs.as_ref()),
        ("seeds", args.seeds.as_ref()),
        ("master_seed", args.master_seed.as_ref()),
        ("audit", args.audit.as_ref()),
        ("verdict", args.verdict.as_ref()),
        ("workers", args.workers.as_ref()),
    ];
    for (key, value) in overrides {
        if let Some(value) = value {
            cfg.set_key(key, value)?;
        }
    }
    if let Some(out) = &args.out {
        cfg.out_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn print_report(report: &ExperimentReport) {
    for cell in &report.cells {
        let mean = cell
            .mean_regret
            .map(|m| format!("{m:.4}"))
            .unwrap_or_else(|| "-".into());
        let sem = cell
            .sem
            .map(|s| format!("{s:.4}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "cell policy={} d={} n={} p={} c={}: mean={} sem={} bound={:.4} audits={}/{} verdict={}",
            cell.policy,
            cell.d,
            cell.n,
            cell.p,
            cell.c,
            mean,
            sem,
            cell.lower_bound,
            cell.audit_passes,
            cell.audit_total,
            cell.verdict
        );
        for failure in &cell.failures {
            eprintln!("  episode failure: {failure}");
        }
    }
    println!(
        "overall: {} ({} episodes)",
        report.overall_verdict,
        report.total_episodes()
    );
}

/// Verdict/audit gate shared by run and scaling: exit 1 unless every audit
/// passed and (when verdicts were requested) every cell met the bound.
fn report_exit(report: &ExperimentReport, verdict_requested: bool) -> u8 {
    if !report.all_audits_pass() {
        eprintln!("audit failures detected");
        return EXIT_VERDICT;
    }
    if verdict_requested && report.overall_verdict != Verdict::Met {
        return EXIT_VERDICT;
    }
    EXIT_OK
}

fn cmd_run(args: &RunArgs) -> Result<u8, Error> {
    let cfg = load_config(args)?;
    let report = run_grid(&cfg)?;
    print_report(&report);
    if let Some(dir) = &cfg.out_dir {
        for path in emit(&report, dir)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(report_exit(&report, cfg.verdict))
}

fn cmd_verify_lemmas(trials: usize, master_seed: u64) -> Result<u8, Error> {
    let report = verify_lemmas(trials, master_seed)?;
    println!(
        "verify-lemmas: {} checks over {} combos x {} trials, {} violations",
        report.checks, report.combos, report.trials_per_combo, report.violations
    );
    println!(
        "  worst residuals: trick {:.3e} (d={} p={} c={}), norm-equivalence {:.3e}, dual identity {:.3e}",
        report.worst_trick.residual,
        report.worst_trick.d,
        report.worst_trick.p,
        report.worst_trick.c,
        report.worst_norm_equivalence.residual,
        report.worst_dual_identity.residual
    );
    Ok(if report.pass() { EXIT_OK } else { EXIT_VERDICT })
}

fn cmd_oracle_check(instances: usize, master_seed: u64) -> Result<u8, Error> {
    let report = oracle_check(instances, master_seed)?;
    println!(
        "oracle-check: {} instances ({} with grid), max relative error {:.3e}",
        report.instances, report.grid_checked, report.max_rel_err
    );
    for failure in &report.failures {
        eprintln!("  {failure}");
    }
    Ok(if report.pass() { EXIT_OK } else { EXIT_VERDICT })
}

fn cmd_scaling(config: &PathBuf, out: Option<&PathBuf>) -> Result<u8, Error> {
    let mut cfg = ExperimentConfig::parse(&std::fs::read_to_string(config)?)?;
    if let Some(out) = out {
        cfg.out_dir = Some(out.clone());
    }
    let scaling = run_scaling(&cfg)?;
    print_report(&scaling.report);
    for (n, mean) in &scaling.per_n {
        println!("scaling n={n}: mean regret {mean:.4}");
    }
    println!(
        "fit vs n: slope {:.4} +/- {:.4} (analytic bound slope {:.12})",
        scaling.fit_vs_n.slope, scaling.fit_vs_n.ci_half_width, scaling.analytic_fit.slope
    );
    if let Some(fit) = &scaling.fit_vs_d {
        println!("fit vs d: slope {:.4} +/- {:.4}", fit.slope, fit.ci_half_width);
    }
    if let Some(dir) = &cfg.out_dir {
        for path in emit(&scaling.report, dir)? {
            println!("wrote {}", path.display());
        }
        let fit_path = dir.join("scaling.json");
        let doc = serde_json::json!({
            "per_n": scaling.per_n,
            "fit_vs_n": scaling.fit_vs_n,
            "analytic_fit": scaling.analytic_fit,
            "fit_vs_d": scaling.fit_vs_d,
        });
        std::fs::write(&fit_path, format!("{:#}\n", doc))?;
        println!("wrote {}", fit_path.display());
    }
    Ok(report_exit(&scaling.report, cfg.verdict))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::VerifyLemmas {
            trials,
            master_seed,
        } => cmd_verify_lemmas(*trials, *master_seed),
        Command::OracleCheck {
            instances,
            master_seed,
        } => cmd_oracle_check(*instances, *master_seed),
        Command::Scaling { config, out } => cmd_scaling(config, out.as_ref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_for(&err))
        }
    }
}
