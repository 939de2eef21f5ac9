//! Report emission: a flat CSV with a fixed column contract, a nested JSON
//! mirror, and an optional JSONL stream of full audit reports. Identical
//! master seed and config produce byte-identical files at any worker count.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::harness::{CellSummary, EpisodeRow, ExperimentReport, Verdict};

/// The fixed CSV header, in contract order.
pub const CSV_COLUMNS: [&str; 14] = [
    "run_id",
    "policy",
    "d",
    "n",
    "p",
    "c",
    "delta",
    "sign_id",
    "seed",
    "pseudo_regret",
    "surrogate_bound",
    "audit_pass",
    "min_eig_final",
    "kl_max",
];

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_bool(v: Option<bool>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serializes the episode rows to CSV. Shortest-round-trip float formatting
/// keeps the file byte-deterministic and lossless.
pub fn write_csv<W: Write>(rows: &[EpisodeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.run_id.to_string(),
            r.policy.to_string(),
            r.d.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.c.to_string(),
            r.delta.to_string(),
            r.sign_id.to_string(),
            r.seed.to_string(),
            r.pseudo_regret.to_string(),
            opt_f64(r.surrogate_bound),
            opt_bool(r.audit_pass),
            opt_f64(r.min_eig_final),
            opt_f64(r.kl_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The JSON mirror: cells with their rows nested inside.
#[derive(Serialize)]
struct JsonReport<'a> {
    master_seed: u64,
    overall_verdict: Verdict,
    episodes: usize,
    cells: Vec<JsonCell<'a>>,
}

#[derive(Serialize)]
struct JsonCell<'a> {
    #[serde(flatten)]
    summary: &'a CellSummary,
    rows: Vec<&'a EpisodeRow>,
}

pub fn write_json<W: Write>(report: &ExperimentReport, mut out: W) -> Result<()> {
    let cells = report
        .cells
        .iter()
        .map(|summary| JsonCell {
            summary,
            rows: report
                .rows
                .iter()
                .filter(|r| {
                    r.policy == summary.policy
                        && r.d == summary.d
                        && r.n == summary.n
                        && r.p == summary.p
                        && r.c == summary.c
                })
                .collect(),
        })
        .collect();
    let doc = JsonReport {
        master_seed: report.master_seed,
        overall_verdict: report.overall_verdict,
        episodes: report.rows.len(),
        cells,
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct AuditLine<'a> {
    run_id: u64,
    policy: &'static str,
    d: usize,
    n: usize,
    p: f64,
    c: f64,
    sign_id: u64,
    seed: u64,
    audit: &'a crate::proofcheck::AuditReport,
}

/// One JSON document per audited episode, aligned with the CSV run_ids.
pub fn write_audits_jsonl<W: Write>(report: &ExperimentReport, mut out: W) -> Result<()> {
    for (row, audit) in report.rows.iter().zip(&report.audits) {
        if let Some(audit) = audit {
            let line = AuditLine {
                run_id: row.run_id,
                policy: row.policy,
                d: row.d,
                n: row.n,
                p: row.p,
                c: row.c,
                sign_id: row.sign_id,
                seed: row.seed,
                audit,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Writes report.csv, report.json, and (when audits exist) audits.jsonl into
/// `dir`, creating it if needed. Returns the paths written.
pub fn emit(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let csv_path = dir.join("report.csv");
    write_csv(&report.rows, fs::File::create(&csv_path)?)?;
    written.push(csv_path);

    let json_path = dir.join("report.json");
    write_json(report, fs::File::create(&json_path)?)?;
    written.push(json_path);

    if report.audits.iter().any(Option::is_some) {
        let audits_path = dir.join("audits.jsonl");
        write_audits_jsonl(report, fs::File::create(&audits_path)?)?;
        written.push(audits_path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_grid, ExperimentConfig, PolicyKind};

    fn tiny_report() -> ExperimentReport {
        let mut cfg = ExperimentConfig::default();
        cfg.policies = vec![PolicyKind::Uniform];
        cfg.d = vec![2];
        cfg.n = vec![32];
        cfg.seeds = 2;
        cfg.master_seed = 5;
        run_grid(&cfg).unwrap()
    }

    #[test]
    fn csv_header_and_row_count() {
        let report = tiny_report();
        let mut buf = Vec::new();
        write_csv(&report.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(lines.count(), 4 * 2); // 4 patterns x 2 seeds
    }

    #[test]
    fn empty_grid_gives_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.trim_end(), CSV_COLUMNS.join(","));
    }

    #[test]
    fn rerun_is_byte_identical() {
        let a = tiny_report();
        let b = tiny_report();
        let mut fa = Vec::new();
        let mut fb = Vec::new();
        write_csv(&a.rows, &mut fa).unwrap();
        write_csv(&b.rows, &mut fb).unwrap();
        assert_eq!(fa, fb);
        let mut ja = Vec::new();
        let mut jb = Vec::new();
        write_json(&a, &mut ja).unwrap();
        write_json(&b, &mut jb).unwrap();
        assert_eq!(ja, jb);
        let mut xa = Vec::new();
        let mut xb = Vec::new();
        write_audits_jsonl(&a, &mut xa).unwrap();
        write_audits_jsonl(&b, &mut xb).unwrap();
        assert_eq!(xa, xb);
        assert!(!xa.is_empty());
    }

    #[test]
    fn emit_writes_all_files() {
        let report = tiny_report();
        let dir = tempfile::tempdir().unwrap();
        let written = emit(&report, dir.path()).unwrap();
        assert_eq!(written.len(), 3);
        for path in &written {
            assert!(path.exists());
            assert!(std::fs::metadata(path).unwrap().len() > 0);
        }
        // JSON parses back and nests rows under cells.
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&written[1]).unwrap()).unwrap();
        assert_eq!(doc["episodes"], 8);
        assert!(doc["cells"][0]["rows"].as_array().unwrap().len() == 8);
    }

    #[test]
    fn audit_off_leaves_columns_empty() {
        let mut cfg = ExperimentConfig::default();
        cfg.policies = vec![PolicyKind::Origin];
        cfg.d = vec![2];
        cfg.n = vec![16];
        cfg.seeds = 2;
        cfg.audit = false;
        let report = run_grid(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&report.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first_row = text.lines().nth(1).unwrap();
        assert!(first_row.ends_with(",,,,"), "row: {first_row}");
    }
}
