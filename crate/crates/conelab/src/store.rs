//! Append-only run store: `results.csv` plus one JSON summary per run.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::record::Record;
use crate::thresholds::{self, Threshold};

pub const RESULTS_FILE: &str = "results.csv";

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub library_version: &'static str,
    pub threshold_table: &'static str,
    pub config: &'a ExperimentConfig,
    pub rows: usize,
    pub failures: usize,
    pub thresholds: Vec<&'static Threshold>,
}

/// Appends `records` to `<dir>/results.csv`, writing the header only when the
/// file is new.
pub fn append(dir: &Path, records: &[Record]) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(RESULTS_FILE);
    let fresh = !path.exists() || fs::metadata(&path)?.len() == 0;
    let file = OpenOptions::new().create(true).append(true).open(&path).with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(path)
}

/// Writes `summary-<scenario>-<seed>.json` next to the CSV.
pub fn write_summary(dir: &Path, cfg: &ExperimentConfig, records: &[Record]) -> Result<PathBuf> {
    let mut cited: Vec<&'static Threshold> = Vec::new();
    for r in records {
        if let Some(t) = thresholds::lookup(&r.scenario, &r.quantity) {
            if !cited.iter().any(|c| c.id == t.id) {
                cited.push(t);
            }
        }
    }
    let summary = Summary {
        library_version: env!("CARGO_PKG_VERSION"),
        threshold_table: thresholds::TABLE_VERSION,
        config: cfg,
        rows: records.len(),
        failures: records.iter().filter(|r| r.verdict.is_failure()).count(),
        thresholds: cited,
    };
    let path = dir.join(format!("summary-{}-{}.json", cfg.scenario, cfg.seed));
    fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    Ok(path)
}

pub fn read_records(dir: &Path) -> Result<Vec<Record>> {
    let path = dir.join(RESULTS_FILE);
    let mut rd = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
    rd.deserialize().map(|r| r.with_context(|| format!("parsing {}", path.display()))).collect()
}
