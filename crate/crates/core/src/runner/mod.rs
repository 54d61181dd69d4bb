//! Experiment runner: configs, dispatch, CSV/JSON artifacts and the
//! `replicate-all` suite.

pub mod acceptance;
pub mod config;
pub mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Result;
pub use config::{ExperimentConfig, EXPERIMENTS};

/// Format version of the JSON summaries; see `schemas/summary.schema.json`.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "LOCBALL_THREADS";

/// Size the global worker pool from `LOCBALL_THREADS`, if set. Results do
/// not depend on the worker count.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        // Fails only if the pool already exists, in which case it stays as is.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Rows of an RFC 4180 CSV artifact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: Table) {
        if self.header.is_empty() {
            self.header = other.header;
        }
        self.rows.extend(other.rows);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip formatting; empty for non-finite values.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        String::new()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// One verdict of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, value: None, threshold: None, detail: detail.into() }
    }

    /// `value ≤ threshold` (or `≥` when `at_least`).
    pub fn compare(name: impl Into<String>, value: f64, threshold: f64, at_least: bool) -> Self {
        let pass = if at_least { value >= threshold } else { value <= threshold };
        let op = if at_least { "≥" } else { "≤" };
        Check {
            name: name.into(),
            pass,
            value: value.is_finite().then_some(value),
            threshold: threshold.is_finite().then_some(threshold),
            detail: format!("{value} {op} {threshold}"),
        }
    }
}

/// Everything an experiment produces besides timing.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub table: Table,
    pub checks: Vec<Check>,
    pub summary: Value,
    pub warnings: Vec<String>,
    /// A standalone report, written by commands that take `--out` as JSON.
    pub report: Option<Value>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// `sha256` of the git blob encoding `blob <len>\0<content>`.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    let digest = h.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

/// Paths of the artifacts written by one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub pass: bool,
    pub csv: PathBuf,
    pub json: PathBuf,
    pub outcome_checks: Vec<Check>,
    pub report: Option<Value>,
}

fn summary_json(
    name: &str,
    seed: u64,
    config: Value,
    hash: String,
    seconds: f64,
    outcome: &Outcome,
    csv_name: &str,
) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": name,
        "seed": seed,
        "config": config,
        "input_hash": hash,
        "wall_clock_seconds": seconds,
        "pass": outcome.pass(),
        "verdicts": outcome.checks,
        "warnings": outcome.warnings,
        "summary": outcome.summary,
        "csv": csv_name,
    })
}

/// Write `<outdir>/<stem>.csv` and `<outdir>/<stem>.json`.
pub fn write_artifacts(
    outdir: &Path,
    stem: &str,
    name: &str,
    seed: u64,
    config: Value,
    seconds: f64,
    outcome: &Outcome,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(outdir)?;
    let csv_path = outdir.join(format!("{stem}.csv"));
    let json_path = outdir.join(format!("{stem}.json"));
    outcome.table.write(&csv_path)?;
    let hash = content_hash(serde_json::to_string(&config)?.as_bytes());
    let doc = summary_json(name, seed, config, hash, seconds, outcome, &format!("{stem}.csv"));
    fs::write(&json_path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok((csv_path, json_path))
}

/// Validate, dispatch, and write `<outdir>/<experiment>-<seed>.{csv,json}`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    let start = Instant::now();
    let outcome = experiments::dispatch(config)?;
    let seconds = start.elapsed().as_secs_f64();
    let stem = format!("{}-{}", config.experiment, config.seed);
    let config_value = serde_json::to_value(config)?;
    let (csv, json) =
        write_artifacts(&config.outdir, &stem, &config.experiment, config.seed, config_value, seconds, &outcome)?;
    Ok(RunResult { pass: outcome.pass(), csv, json, outcome_checks: outcome.checks, report: outcome.report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn git_blob_hash_of_empty_content() {
        // `git hash-object --object-format=sha256 /dev/null`
        assert_eq!(
            content_hash(b""),
            "sha256:473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }

    #[test]
    fn number_formatting() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(f64::NAN), "");
        assert_eq!(num(f64::INFINITY), "inf");
    }
}
