//! Experiment runner: configs in, manifests, CSV traces, certificate records
//! and SVG plots out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod experiments;
pub mod plot;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use compare::{compare_report, Diff, DiffEntry};
pub use config::{Experiment, ExperimentConfig};

pub const MANIFEST: &str = "manifest.json";
pub const ERROR_FILE: &str = "error.txt";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] wpi_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub passed: bool,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    /// Finite numeric results keyed by name.
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    /// File names relative to the run directory.
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path)
            .map_err(|e| HarnessError::Manifest(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// What an experiment reports back; the runner turns it into a manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
}

impl Outcome {
    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    /// Non-finite values are kept out of the manifest and noted instead.
    pub fn metric(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.into(), value);
        } else {
            self.notes.push(format!("metric `{name}` is not finite ({value})"));
        }
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn artifact(&mut self, name: &str) {
        self.artifacts.push(name.into());
    }
}

/// Runs one experiment into its output directory. Failures leave an
/// `error.txt` there and propagate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest, HarnessError> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)?;
    let _ = fs::remove_file(dir.join(ERROR_FILE));
    match run_into(cfg, &dir) {
        Ok(m) => Ok(m),
        Err(e) => {
            let _ = fs::write(dir.join(ERROR_FILE), format!("{} failed: {e}\n", cfg.experiment));
            Err(e)
        }
    }
}

fn run_into(cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest, HarnessError> {
    cfg.validate()?;
    fs::write(dir.join("config.toml"), cfg.resolved()?)?;
    let mut out = experiments::run(cfg, dir)?;
    out.artifacts.insert(0, "config.toml".into());
    let manifest = Manifest {
        experiment: cfg.experiment.as_str().into(),
        version: wpi_core::VERSION.into(),
        seed: cfg.seed,
        passed: out.checks.iter().all(|c| c.passed),
        config: serde_json::to_value(cfg)?,
        checks: out.checks,
        metrics: out.metrics,
        notes: out.notes,
        artifacts: out.artifacts,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub config: PathBuf,
    pub out_dir: PathBuf,
    pub passed: bool,
    pub error: Option<String>,
}

/// Runs the configs concurrently, one thread each, and writes `batch.json`
/// into `index_dir` once all have finished. Output directories must differ.
pub fn run_batch(configs: &[(PathBuf, ExperimentConfig)], index_dir: &Path) -> Result<Vec<BatchEntry>, HarnessError> {
    let mut dirs: Vec<PathBuf> = configs.iter().map(|(_, c)| c.out_dir()).collect();
    dirs.sort();
    if let Some(w) = dirs.windows(2).find(|w| w[0] == w[1]) {
        return Err(HarnessError::Config(format!("two batch entries share the output directory {}", w[0].display())));
    }
    let entries: Vec<BatchEntry> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|(path, cfg)| {
                s.spawn(move || {
                    let res = run_experiment(cfg);
                    BatchEntry {
                        config: path.clone(),
                        out_dir: cfg.out_dir(),
                        passed: matches!(&res, Ok(m) if m.passed),
                        error: res.err().map(|e| e.to_string()),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
    });
    fs::create_dir_all(index_dir)?;
    fs::write(index_dir.join("batch.json"), serde_json::to_string_pretty(&entries)? + "\n")?;
    Ok(entries)
}
