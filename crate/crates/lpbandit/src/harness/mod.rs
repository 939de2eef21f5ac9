//! Experiment orchestration: enumerates (cell, sign pattern, seed) episode
//! tasks, runs them on a worker pool (or sequentially), audits trajectories,
//! and reduces to per-cell statistics with lower-bound verdicts. Counter-based
//! seeding plus a fixed output sort make results byte-identical for any
//! worker count.

pub mod config;
pub mod emit;
pub mod scaling;
pub mod sweeps;

pub use config::{ExperimentConfig, PolicyKind, SignStrategy};
pub use scaling::{fit_loglog, ScalingFit};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::env::{pseudo_regret, run_episode};
use crate::error::{Error, Result};
use crate::geometry::LpBall;
use crate::instance::{
    all_pattern_ids, make_instance, minimax_lower_bound, pattern_from_id, sample_pattern_ids,
    HardFamily, HardInstance,
};
use crate::policies::{AntiOracle, Etc, LinUcb, Oracle, OriginPolicy, Policy, UniformVertex};
use crate::proofcheck::{audit_trajectory, AuditReport};
use crate::seeding::{derive_seed, policy_tag};

/// One grid cell: a policy on one hard family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellKey {
    pub policy: PolicyKind,
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub c: f64,
}

/// One completed episode, flattened for the CSV contract.
#[derive(Debug, Clone, Serialize)]
pub struct EpisodeRow {
    pub run_id: u64,
    pub policy: &'static str,
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub c: f64,
    pub delta: f64,
    pub sign_id: u64,
    /// Seed index within the (cell, pattern) block.
    pub seed: u64,
    /// The derived per-episode generator seed actually used.
    pub derived_seed: u64,
    pub pseudo_regret: f64,
    /// Audit-derived columns; absent when auditing is off.
    pub surrogate_bound: Option<f64>,
    pub audit_pass: Option<bool>,
    pub min_eig_final: Option<f64>,
    pub kl_max: Option<f64>,
}

/// Lower-bound verdict for a cell's grand mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Met,
    NotMet,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Met => "met",
            Self::NotMet => "not met",
            Self::Inconclusive => "inconclusive",
        })
    }
}

/// Aggregated statistics for one cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub policy: &'static str,
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub c: f64,
    pub delta: f64,
    pub lower_bound: f64,
    pub episodes: usize,
    pub mean_regret: Option<f64>,
    /// Standard error of the grand mean; needs >= 2 episodes.
    pub sem: Option<f64>,
    pub audit_passes: usize,
    pub audit_total: usize,
    pub failures: Vec<String>,
    pub verdict: Verdict,
}

/// Everything run_grid produces. `audits` is aligned with `rows` by index.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub master_seed: u64,
    pub overall_verdict: Verdict,
    pub cells: Vec<CellSummary>,
    pub rows: Vec<EpisodeRow>,
    #[serde(skip)]
    pub audits: Vec<Option<AuditReport>>,
}

impl ExperimentReport {
    /// True when every audited trajectory passed all hard checks.
    pub fn all_audits_pass(&self) -> bool {
        self.cells.iter().all(|c| c.audit_passes == c.audit_total)
    }

    pub fn total_episodes(&self) -> usize {
        self.rows.len()
    }
}

struct Task {
    policy: PolicyKind,
    d: usize,
    n: usize,
    p: f64,
    c: f64,
    sign_id: u64,
    seed_idx: u64,
}

enum Outcome {
    Done(Box<(EpisodeRow, Option<AuditReport>)>),
    Failed {
        key: CellKey,
        message: String,
    },
}

fn build_policy(kind: PolicyKind, cfg: &ExperimentConfig, ball: LpBall, n: usize, inst: &HardInstance) -> Result<Box<dyn Policy>> {
    Ok(match kind {
        PolicyKind::Uniform => Box::new(UniformVertex::new(ball)),
        PolicyKind::Etc => {
            let m = cfg.etc_m.unwrap_or_else(|| Etc::default_m(ball.dim(), n));
            Box::new(Etc::new(ball, m)?)
        }
        PolicyKind::LinUcb => {
            let theta_norm = inst.family().delta() * (ball.dim() as f64).sqrt();
            Box::new(LinUcb::new(ball, cfg.linucb_config(theta_norm))?)
        }
        PolicyKind::Oracle => Box::new(Oracle::new(inst)),
        PolicyKind::AntiOracle => Box::new(AntiOracle::new(inst)),
        PolicyKind::Origin => Box::new(OriginPolicy::new(ball.dim())),
    })
}

fn run_task(cfg: &ExperimentConfig, task: &Task) -> Outcome {
    let key = CellKey {
        policy: task.policy,
        d: task.d,
        n: task.n,
        p: task.p,
        c: task.c,
    };
    let fail = |message: String| Outcome::Failed { key, message };
    let result = (|| -> Result<(EpisodeRow, Option<AuditReport>)> {
        let ball = LpBall::new(task.d, task.p, task.c)?;
        let family = HardFamily::new(ball, task.n)?;
        let signs = pattern_from_id(task.d, task.sign_id);
        let inst = make_instance(&family, &signs)?;
        let mut policy = build_policy(task.policy, cfg, ball, task.n, &inst)?;
        let derived = derive_seed(
            cfg.master_seed,
            &[
                policy_tag(task.policy.name()),
                task.d as u64,
                task.n as u64,
                task.p.to_bits(),
                task.c.to_bits(),
                task.sign_id,
                task.seed_idx,
            ],
        );
        let traj = run_episode(policy.as_mut(), &inst, task.n, derived).map_err(|e| e.error)?;
        let regret = pseudo_regret(&traj);
        let audit = if cfg.audit {
            Some(audit_trajectory(&traj, &inst, None)?)
        } else {
            None
        };
        let row = EpisodeRow {
            run_id: 0, // assigned after the deterministic sort
            policy: task.policy.name(),
            d: task.d,
            n: task.n,
            p: task.p,
            c: task.c,
            delta: family.delta(),
            sign_id: task.sign_id,
            seed: task.seed_idx,
            derived_seed: derived,
            pseudo_regret: regret,
            surrogate_bound: audit.as_ref().map(|a| a.surrogate),
            audit_pass: audit.as_ref().map(AuditReport::audit_pass),
            min_eig_final: audit.as_ref().map(AuditReport::min_eig_final),
            kl_max: audit.as_ref().map(AuditReport::kl_max),
        };
        Ok((row, audit))
    })();
    match result {
        Ok(pair) => Outcome::Done(Box::new(pair)),
        Err(e) => fail(format!(
            "sign_id={} seed={}: {e}",
            task.sign_id, task.seed_idx
        )),
    }
}

/// Sign patterns for one cell under the configured strategy, deterministic in
/// the master seed.
fn patterns_for(cfg: &ExperimentConfig, d: usize) -> Vec<u64> {
    match cfg.signs {
        SignStrategy::All => all_pattern_ids(d),
        SignStrategy::Sample(k) => {
            use rand::SeedableRng;
            let seed = derive_seed(cfg.master_seed, &[policy_tag("sign-strategy"), d as u64]);
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            sample_pattern_ids(d, k, &mut rng)
        }
    }
}

fn sort_key(row: &EpisodeRow) -> (&'static str, usize, usize, u64, u64, u64, u64) {
    (
        row.policy,
        row.d,
        row.n,
        row.p.to_bits(),
        row.c.to_bits(),
        row.sign_id,
        row.seed,
    )
}

/// Runs every episode of the grid, audits if enabled, and aggregates.
/// Episode failures become per-cell entries without aborting the grid.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;

    let mut tasks = Vec::new();
    let mut cell_keys = Vec::new();
    for &policy in &cfg.policies {
        for &d in &cfg.d {
            let patterns = patterns_for(cfg, d);
            for &n in &cfg.n {
                for &p in &cfg.p {
                    for &c in &cfg.c {
                        cell_keys.push(CellKey { policy, d, n, p, c });
                        for &sign_id in &patterns {
                            for seed_idx in 0..cfg.seeds as u64 {
                                tasks.push(Task {
                                    policy,
                                    d,
                                    n,
                                    p,
                                    c,
                                    sign_id,
                                    seed_idx,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    let outcomes: Vec<Outcome> = run_tasks(cfg, &tasks);

    let mut pairs: Vec<(EpisodeRow, Option<AuditReport>)> = Vec::with_capacity(outcomes.len());
    let mut failures: Vec<(CellKey, String)> = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::Done(pair) => pairs.push(*pair),
            Outcome::Failed { key, message } => failures.push((key, message)),
        }
    }
    pairs.sort_by(|a, b| sort_key(&a.0).cmp(&sort_key(&b.0)));
    let (mut rows, audits): (Vec<EpisodeRow>, Vec<Option<AuditReport>>) =
        pairs.into_iter().unzip();
    for (i, row) in rows.iter_mut().enumerate() {
        row.run_id = i as u64;
    }

    let cells = summarize(cfg, &cell_keys, &rows, &failures);
    let overall_verdict = overall(&cells);
    Ok(ExperimentReport {
        master_seed: cfg.master_seed,
        overall_verdict,
        cells,
        rows,
        audits,
    })
}

fn run_tasks(cfg: &ExperimentConfig, tasks: &[Task]) -> Vec<Outcome> {
    #[cfg(feature = "parallel")]
    {
        if cfg.workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build();
            match pool {
                Ok(pool) => {
                    return pool.install(|| tasks.par_iter().map(|t| run_task(cfg, t)).collect());
                }
                Err(_) => {
                    // Fall through to the sequential path; results are
                    // identical by construction.
                }
            }
        }
    }
    tasks.iter().map(|t| run_task(cfg, t)).collect()
}

fn summarize(
    cfg: &ExperimentConfig,
    cell_keys: &[CellKey],
    rows: &[EpisodeRow],
    failures: &[(CellKey, String)],
) -> Vec<CellSummary> {
    let mut keys = cell_keys.to_vec();
    keys.sort_by(|a, b| {
        (a.policy.name(), a.d, a.n, a.p.to_bits(), a.c.to_bits()).cmp(&(
            b.policy.name(),
            b.d,
            b.n,
            b.p.to_bits(),
            b.c.to_bits(),
        ))
    });
    keys.dedup_by(|a, b| a == b);

    keys.iter()
        .map(|key| {
            let cell_rows: Vec<&EpisodeRow> = rows
                .iter()
                .filter(|r| {
                    r.policy == key.policy.name()
                        && r.d == key.d
                        && r.n == key.n
                        && r.p == key.p
                        && r.c == key.c
                })
                .collect();
            let episodes = cell_rows.len();
            let mean_regret = if episodes > 0 {
                Some(cell_rows.iter().map(|r| r.pseudo_regret).sum::<f64>() / episodes as f64)
            } else {
                None
            };
            let sem = mean_regret.filter(|_| episodes >= 2).map(|mean| {
                let var = cell_rows
                    .iter()
                    .map(|r| (r.pseudo_regret - mean).powi(2))
                    .sum::<f64>()
                    / (episodes - 1) as f64;
                (var / episodes as f64).sqrt()
            });
            let audit_total = cell_rows.iter().filter(|r| r.audit_pass.is_some()).count();
            let audit_passes = cell_rows
                .iter()
                .filter(|r| r.audit_pass == Some(true))
                .count();
            let lower_bound = minimax_lower_bound(key.d, key.n);
            let delta = crate::instance::delta_gap(key.d, key.n, key.p, key.c)
                .expect("validated by run_grid");
            let cell_failures: Vec<String> = failures
                .iter()
                .filter(|(k, _)| k == key)
                .map(|(_, m)| m.clone())
                .collect();
            let verdict = if !cfg.verdict {
                Verdict::Inconclusive
            } else {
                match (mean_regret, sem) {
                    (Some(mean), Some(sem)) => {
                        if mean >= lower_bound - 2.0 * sem {
                            Verdict::Met
                        } else {
                            Verdict::NotMet
                        }
                    }
                    _ => Verdict::Inconclusive,
                }
            };
            CellSummary {
                policy: key.policy.name(),
                d: key.d,
                n: key.n,
                p: key.p,
                c: key.c,
                delta,
                lower_bound,
                episodes,
                mean_regret,
                sem,
                audit_passes,
                audit_total,
                failures: cell_failures,
                verdict,
            }
        })
        .collect()
}

fn overall(cells: &[CellSummary]) -> Verdict {
    if cells.iter().any(|c| c.verdict == Verdict::NotMet) {
        Verdict::NotMet
    } else if cells.is_empty() || cells.iter().any(|c| c.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Met
    }
}

/// A multi-horizon scaling study: the grid plus log-log fits of mean regret
/// against n (and against d when the grid has several), with the analytic
/// bound sequence fitted by the same routine as a self-test.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub per_n: Vec<(usize, f64)>,
    pub fit_vs_n: ScalingFit,
    pub analytic_fit: ScalingFit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_vs_d: Option<ScalingFit>,
    pub report: ExperimentReport,
}

/// Minimum horizon count and span for a meaningful exponent fit.
pub const SCALING_MIN_HORIZONS: usize = 4;
pub const SCALING_MIN_SPAN: f64 = 16.0;

pub fn run_scaling(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    if cfg.policies.len() != 1 {
        return Err(Error::Config(
            "scaling fits one policy at a time; set policy to a single name".into(),
        ));
    }
    let mut ns = cfg.n.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < SCALING_MIN_HORIZONS {
        return Err(Error::Config(format!(
            "scaling needs >= {SCALING_MIN_HORIZONS} distinct horizons, got {}",
            ns.len()
        )));
    }
    let span = ns[ns.len() - 1] as f64 / ns[0] as f64;
    if span < SCALING_MIN_SPAN {
        return Err(Error::Config(format!(
            "scaling needs a >= {SCALING_MIN_SPAN}x horizon span, got {span:.1}x"
        )));
    }
    let report = run_grid(cfg)?;

    let mut per_n = Vec::with_capacity(ns.len());
    for &n in &ns {
        let regrets: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.pseudo_regret)
            .collect();
        if regrets.is_empty() {
            return Err(Error::FitUndefined(format!("no episodes at n={n}")));
        }
        per_n.push((n, regrets.iter().sum::<f64>() / regrets.len() as f64));
    }
    let xs: Vec<f64> = per_n.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = per_n.iter().map(|&(_, m)| m).collect();
    let fit_vs_n = fit_loglog(&xs, &ys)?;

    let analytic: Vec<f64> = ns
        .iter()
        .map(|&n| minimax_lower_bound(cfg.d[0], n))
        .collect();
    let analytic_fit = fit_loglog(&xs, &analytic)?;

    let mut ds = cfg.d.clone();
    ds.sort_unstable();
    ds.dedup();
    let fit_vs_d = if ds.len() >= 2 {
        let mut per_d = Vec::with_capacity(ds.len());
        for &d in &ds {
            let regrets: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.d == d)
                .map(|r| r.pseudo_regret)
                .collect();
            if regrets.is_empty() {
                return Err(Error::FitUndefined(format!("no episodes at d={d}")));
            }
            per_d.push(regrets.iter().sum::<f64>() / regrets.len() as f64);
        }
        let dx: Vec<f64> = ds.iter().map(|&d| d as f64).collect();
        Some(fit_loglog(&dx, &per_d)?)
    } else {
        None
    };

    Ok(ScalingReport {
        per_n,
        fit_vs_n,
        analytic_fit,
        fit_vs_d,
        report,
    })
}
