//! Experiment configuration: a flat key=value text format with section dots,
//! parsed into a validated grid description. CLI flags apply as overrides on
//! top of file keys.

use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{admissible, delta_gap};
use crate::policies::LinUcbConfig;

/// Which policy drives the episodes. The last three know the instance's sign
/// pattern and exist to exercise reporting and audits, not to compete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Uniform,
    Etc,
    LinUcb,
    Oracle,
    AntiOracle,
    Origin,
}

impl PolicyKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" | "uniform-vertex" => Ok(Self::Uniform),
            "etc" => Ok(Self::Etc),
            "linucb" => Ok(Self::LinUcb),
            "oracle" => Ok(Self::Oracle),
            "anti-oracle" => Ok(Self::AntiOracle),
            "origin" => Ok(Self::Origin),
            other => Err(Error::Config(format!(
                "unknown policy {other:?} (expected uniform | etc | linucb | oracle | anti-oracle | origin)"
            ))),
        }
    }

    /// Canonical name, identical to the policy object's `name()`.
    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Etc => "etc",
            Self::LinUcb => "linucb",
            Self::Oracle => "oracle",
            Self::AntiOracle => "anti-oracle",
            Self::Origin => "origin",
        }
    }
}

/// How sign patterns are chosen per cell: every vertex of the hypercube, or
/// a without-replacement sample of K patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignStrategy {
    All,
    Sample(usize),
}

impl SignStrategy {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(Self::All);
        }
        if let Some(k) = s.strip_prefix("sample:") {
            let k: usize = k
                .parse()
                .map_err(|_| Error::Config(format!("bad sample count in signs={s:?}")))?;
            if k == 0 {
                return Err(Error::Config("signs=sample:K needs K >= 1".into()));
            }
            return Ok(Self::Sample(k));
        }
        Err(Error::Config(format!(
            "unknown sign strategy {s:?} (expected all | sample:K)"
        )))
    }
}

/// Exhaustive sign enumeration is gated to keep 2^d enumerable.
pub const MAX_EXHAUSTIVE_D: usize = 12;

/// The full description of one experiment grid.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub policies: Vec<PolicyKind>,
    pub d: Vec<usize>,
    pub n: Vec<usize>,
    pub p: Vec<f64>,
    pub c: Vec<f64>,
    pub signs: SignStrategy,
    /// Episodes per (cell, sign pattern).
    pub seeds: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub audit: bool,
    /// Whether cells receive a lower-bound verdict (requires seeds >= 2).
    pub verdict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// ETC exploration length; defaults per cell to ceil(d sqrt(n)).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub etc_m: Option<usize>,
    pub linucb_lambda: f64,
    pub linucb_delta: f64,
    pub linucb_restarts: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let lin = LinUcbConfig::default();
        Self {
            policies: vec![PolicyKind::Uniform],
            d: vec![2],
            n: vec![256],
            p: vec![2.0],
            c: vec![1.0],
            signs: SignStrategy::All,
            seeds: 2,
            master_seed: 0,
            workers: 1,
            audit: true,
            verdict: true,
            out_dir: None,
            etc_m: None,
            linucb_lambda: lin.lambda,
            linucb_delta: lin.delta,
            linucb_restarts: lin.restarts,
        }
    }
}

fn parse_list<T, F>(value: &str, key: &str, f: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Result<T>,
{
    let items: Result<Vec<T>> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key} must list at least one value")));
    }
    Ok(items)
}

fn parse_num<T: std::str::FromStr>(s: &str, key: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value {s:?} for {key}")))
}

fn parse_switch(s: &str, key: &str) -> Result<bool> {
    match s.trim() {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(Error::Config(format!(
            "bad value {other:?} for {key} (expected on | off)"
        ))),
    }
}

impl ExperimentConfig {
    /// Applies one key=value assignment. Unknown keys are errors so typos
    /// cannot silently change an experiment.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "policy" => self.policies = parse_list(value, key, PolicyKind::parse)?,
            "d" => self.d = parse_list(value, key, |s| parse_num(s, key))?,
            "n" => self.n = parse_list(value, key, |s| parse_num(s, key))?,
            "p" => self.p = parse_list(value, key, |s| parse_num(s, key))?,
            "c" => self.c = parse_list(value, key, |s| parse_num(s, key))?,
            "signs" => self.signs = SignStrategy::parse(value)?,
            "seeds" => self.seeds = parse_num(value, key)?,
            "master_seed" => self.master_seed = parse_num(value, key)?,
            "workers" => self.workers = parse_num(value, key)?,
            "audit" => self.audit = parse_switch(value, key)?,
            "verdict" => self.verdict = parse_switch(value, key)?,
            "out" => self.out_dir = Some(PathBuf::from(value.trim())),
            "etc.m" => self.etc_m = Some(parse_num(value, key)?),
            "linucb.lambda" => self.linucb_lambda = parse_num(value, key)?,
            "linucb.delta" => self.linucb_delta = parse_num(value, key)?,
            "linucb.restarts" => self.linucb_restarts = parse_num(value, key)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parses the flat key=value format: one assignment per line, `#` starts
    /// a comment, blank lines ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Applies key=value lines on top of the current settings.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            self.set_key(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Full validation: grid admissibility, sign-strategy gates, verdict
    /// precondition, policy hyperparameters.
    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::Config("no policy selected".into()));
        }
        if self.d.is_empty() || self.n.is_empty() || self.p.is_empty() || self.c.is_empty() {
            return Err(Error::Config("d, n, p, c must each list at least one value".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be >= 1".into()));
        }
        if self.verdict && self.seeds < 2 {
            return Err(Error::Config(
                "a lower-bound verdict needs seeds >= 2 (standard error requires variance)".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if let SignStrategy::All = self.signs {
            if let Some(&d) = self.d.iter().find(|&&d| d > MAX_EXHAUSTIVE_D) {
                return Err(Error::Config(format!(
                    "signs=all enumerates 2^d patterns; d={d} exceeds the gate d <= {MAX_EXHAUSTIVE_D}; use signs=sample:K"
                )));
            }
        }
        for &d in &self.d {
            for &n in &self.n {
                for &p in &self.p {
                    for &c in &self.c {
                        // Rejects inadmissible tuples (and invalid balls) with
                        // the full two-condition diagnostic.
                        let _ = delta_gap(d, n, p, c)?;
                        debug_assert!(admissible(d, n, p, c).ok);
                    }
                }
            }
        }
        self.linucb_config(1.0).validate()?;
        Ok(())
    }

    /// LinUCB hyperparameters for an instance whose true parameter has the
    /// given Euclidean norm.
    pub fn linucb_config(&self, theta_norm: f64) -> LinUcbConfig {
        LinUcbConfig {
            lambda: self.linucb_lambda,
            delta: self.linucb_delta,
            sigma: 1.0,
            s_norm: theta_norm,
            restarts: self.linucb_restarts,
        }
    }
}
