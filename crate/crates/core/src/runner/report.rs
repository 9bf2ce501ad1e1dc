//! Per-cell CSV and JSON reports.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::run::RunReport;
use super::{Result, RunnerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(RunnerError::InvalidConfig(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Serialize)]
struct SummaryRow {
    setting: String,
    schema_format: String,
    content_format: String,
    mode: String,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    seed: String,
    accuracy: f64,
    mean_tokens: f64,
}

/// Accuracy of the examples whose prompt length falls in one bin, pooled over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthBin {
    pub bin_start: usize,
    pub bin_end: usize,
    pub examples: usize,
    pub accuracy: f64,
}

pub fn length_bins(report: &RunReport) -> Vec<LengthBin> {
    let width = report.config.bin_width.max(1);
    let mut bins: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
    for e in report.seeds.iter().flat_map(|s| &s.examples) {
        let slot = bins.entry(e.prompt_tokens / width).or_default();
        slot.0 += 1;
        slot.1 += e.outcome.matched as usize;
    }
    bins.into_iter()
        .map(|(b, (n, hits))| LengthBin {
            bin_start: b * width,
            bin_end: (b + 1) * width,
            examples: n,
            accuracy: hits as f64 / n as f64,
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Companion file holding the length bins of a CSV report.
pub fn bins_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.length_bins.csv"))
}

fn write_csv(reports: &[RunReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        let c = &r.config;
        let row = |seed: String, accuracy: f64, mean_tokens: f64| SummaryRow {
            setting: c.setting.to_string(),
            schema_format: c.schema_format.to_string(),
            content_format: c.content_format.to_string(),
            mode: c.mode.to_string(),
            n: c.n,
            m: c.m,
            k: c.k,
            seed,
            accuracy,
            mean_tokens,
        };
        for s in &r.seeds {
            w.serialize(row(s.seed.to_string(), s.accuracy, s.mean_tokens))?;
        }
        w.serialize(row("mean".into(), r.mean_accuracy, r.mean_tokens))?;
    }
    w.flush().map_err(io_err(path))?;

    #[derive(Serialize)]
    struct BinRow<'a> {
        construction: &'a str,
        mode: String,
        setting: String,
        #[serde(rename = "N")]
        n: usize,
        bin_start: usize,
        bin_end: usize,
        examples: usize,
        accuracy: f64,
    }
    let bins = bins_path(path);
    let mut w = csv::Writer::from_path(&bins)?;
    for r in reports {
        for bin in &length_bins(r) {
            w.serialize(BinRow {
                construction: &r.construction,
                mode: r.config.mode.to_string(),
                setting: r.config.setting.to_string(),
                n: r.config.n,
                bin_start: bin.bin_start,
                bin_end: bin.bin_end,
                examples: bin.examples,
                accuracy: bin.accuracy,
            })?;
        }
    }
    w.flush().map_err(io_err(&bins))?;
    Ok(())
}

/// Writes `reports` to `path`. CSV output also writes `<stem>.length_bins.csv`.
pub fn emit_report(reports: &[RunReport], format: ReportFormat, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    match format {
        ReportFormat::Csv => write_csv(reports, path),
        ReportFormat::Json => {
            let file = File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, reports)?;
            w.flush().map_err(io_err(path))
        }
    }
}

/// Reads a JSON report written by [`emit_report`].
pub fn load_reports(path: &Path) -> Result<Vec<RunReport>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
