use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::sweep::{BoundViolation, SweepOutput};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes serializable rows with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header-only CSV when there are no rows.
pub fn write_csv_with_header<T: Serialize>(
    path: &Path,
    header: &[&str],
    rows: &[T],
) -> Result<(), HarnessError> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        w.flush()?;
        return Ok(());
    }
    write_csv(path, rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Run record stored next to the result files.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub parallel: bool,
    pub workers: usize,
    pub outputs: Vec<String>,
    pub runtime_ms: f64,
    pub failed_trials: usize,
    pub bound_violations: Vec<BoundViolation>,
    pub extra: Value,
}

impl Manifest {
    pub fn new(subcommand: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            seed: cfg.seed,
            parallel: tensor_core::par::is_parallel(),
            workers: cfg.workers,
            outputs: vec![],
            runtime_ms: 0.0,
            failed_trials: 0,
            bound_violations: vec![],
            extra: Value::Null,
        }
    }
}

/// Output directory writer that records every file it creates.
pub struct OutDir {
    pub root: PathBuf,
    pub written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: vec![],
        })
    }

    /// Path of `name` inside the directory, recorded as an output.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.root.join(name)
    }

    pub fn finish(mut self, mut manifest: Manifest) -> Result<PathBuf, HarnessError> {
        manifest.outputs = std::mem::take(&mut self.written);
        let path = self.root.join(MANIFEST_FILE);
        write_json(&path, &manifest)?;
        Ok(path)
    }
}

pub const RESULTS_FILE: &str = "results.csv";
pub const TRIALS_FILE: &str = "trials.csv";

/// `results.csv` (one row per estimator and grid point) and `trials.csv`.
pub fn write_sweep(out: &mut OutDir, sweep: &SweepOutput) -> Result<(), HarnessError> {
    write_csv(&out.file(RESULTS_FILE), &sweep.rows)?;
    write_csv(&out.file(TRIALS_FILE), &sweep.trials)?;
    Ok(())
}
