//! Flat-file artifacts: data tables, summaries, the resolved config, the run
//! manifest and error records.
//!
//! Data files depend only on the config, the seed and the artifact version.
//! Wall-clock time appears in the manifest alone.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lrp_core::KernelSpec;
use serde::Serialize;

use crate::config::{ExperimentConfig, OutputFormat};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DATA_FORMAT: &str = "lrp-data";
pub const DATA_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ERROR_FILE: &str = "error.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

/// One row of a data table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub d: usize,
    pub family: String,
    pub beta: f64,
    pub n: usize,
    pub statistic: String,
    pub mean: f64,
    pub stderr: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl Row {
    pub fn builder(experiment: &str, d: usize, kernel: &KernelSpec, n: usize, seed: u64) -> RowBuilder {
        RowBuilder {
            base: Row {
                experiment: experiment.to_string(),
                d,
                family: kernel.family.to_string(),
                beta: kernel.beta,
                n,
                statistic: String::new(),
                mean: 0.0,
                stderr: 0.0,
                replicates: 0,
                seed,
            },
        }
    }
}

/// Shares the provenance columns across the rows of one experiment.
#[derive(Debug, Clone)]
pub struct RowBuilder {
    base: Row,
}

impl RowBuilder {
    pub fn stat(&self, statistic: &str, mean: f64, stderr: f64, replicates: usize) -> Row {
        Row {
            statistic: statistic.to_string(),
            mean,
            stderr,
            replicates,
            ..self.base.clone()
        }
    }

    /// A deterministic quantity: no standard error, one evaluation.
    pub fn exact(&self, statistic: &str, value: f64) -> Row {
        self.stat(statistic, value, 0.0, 1)
    }

    pub fn with_n(&self, n: usize) -> RowBuilder {
        let mut b = self.clone();
        b.base.n = n;
        b
    }
}

/// Result of one subcommand.
#[derive(Debug, Clone)]
pub struct Report {
    pub experiment: String,
    pub rows: Vec<Row>,
    /// Experiment-specific diagnostics, written as `<experiment>.summary.json`.
    pub summary: serde_json::Value,
    /// Additional named files, such as a sampled configuration.
    pub extra: Vec<(String, Vec<u8>)>,
    /// `false` when a check inside the experiment failed.
    pub passed: bool,
    pub failure: Option<String>,
}

impl Report {
    pub fn new(experiment: &str, rows: Vec<Row>, summary: serde_json::Value) -> Self {
        Self {
            experiment: experiment.to_string(),
            rows,
            summary,
            extra: Vec::new(),
            passed: true,
            failure: None,
        }
    }
}

pub fn table_bytes(rows: &[Row], format: OutputFormat) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        OutputFormat::Csv => {
            writeln!(out, "# {DATA_FORMAT} v{DATA_FORMAT_VERSION}")?;
            let mut w = csv::Writer::from_writer(&mut out);
            for r in rows {
                w.serialize(r)?;
            }
            if rows.is_empty() {
                w.write_record([
                    "experiment",
                    "d",
                    "family",
                    "beta",
                    "n",
                    "statistic",
                    "mean",
                    "stderr",
                    "replicates",
                    "seed",
                ])?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let doc = serde_json::json!({
                "format": DATA_FORMAT,
                "version": DATA_FORMAT_VERSION,
                "rows": rows,
            });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            out.push(b'\n');
        }
    }
    Ok(out)
}

fn json_bytes(value: &serde_json::Value) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes the data table, the summary and any extra files of `report`,
/// returning the file names in write order.
pub fn write_report(dir: &Path, report: &Report, format: OutputFormat) -> Result<Vec<String>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let mut files = Vec::new();
    let table = format!("{}.{ext}", report.experiment);
    write_atomic(&dir.join(&table), &table_bytes(&report.rows, format)?)?;
    files.push(table);
    let summary = format!("{}.summary.json", report.experiment);
    let doc = serde_json::json!({
        "format": "lrp-summary",
        "version": DATA_FORMAT_VERSION,
        "experiment": report.experiment,
        "passed": report.passed,
        "summary": report.summary,
    });
    write_atomic(&dir.join(&summary), &json_bytes(&doc)?)?;
    files.push(summary);
    for (name, bytes) in &report.extra {
        write_atomic(&dir.join(name), bytes)?;
        files.push(name.clone());
    }
    Ok(files)
}

pub fn write_resolved_config(dir: &Path, config: &ExperimentConfig) -> Result<String> {
    fs::create_dir_all(dir)?;
    let text = format!("# lrp-config v{DATA_FORMAT_VERSION}\n{}", config.to_toml()?);
    write_atomic(&dir.join(RESOLVED_CONFIG_FILE), text.as_bytes())?;
    Ok(RESOLVED_CONFIG_FILE.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub format: &'static str,
    pub version: u32,
    pub artifact_version: &'static str,
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub files: &'a [String],
    pub wall_clock_seconds: f64,
    pub status: RunStatus,
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest<'_>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(MANIFEST_FILE);
    write_atomic(&path, &json_bytes(&serde_json::to_value(manifest)?)?)?;
    Ok(path)
}

/// Machine-readable record of a failed run.
#[derive(Debug, Serialize)]
pub struct ErrorRecord<'a> {
    pub format: &'static str,
    pub version: u32,
    pub command: &'a str,
    pub kind: &'a str,
    pub message: String,
}

pub fn write_error(dir: &Path, record: &ErrorRecord<'_>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join(ERROR_FILE), &json_bytes(&serde_json::to_value(record)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_a_versioned_header() {
        let b = Row::builder("lambda", 1, &KernelSpec::exact(0.0), 32, 7);
        let rows = vec![b.stat("corner_e1", 31.0, 0.0, 10), b.exact("lambda_hat", 32.0)];
        let text = String::from_utf8(table_bytes(&rows, OutputFormat::Csv).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# lrp-data v1"));
        assert_eq!(
            lines.next(),
            Some("experiment,d,family,beta,n,statistic,mean,stderr,replicates,seed")
        );
        assert_eq!(lines.next(), Some("lambda,1,exact_cube,0.0,32,corner_e1,31.0,0.0,10,7"));
    }

    #[test]
    fn empty_tables_keep_their_columns() {
        let text = String::from_utf8(table_bytes(&[], OutputFormat::Csv).unwrap()).unwrap();
        assert_eq!(text.lines().count(), 2);
    }
}
