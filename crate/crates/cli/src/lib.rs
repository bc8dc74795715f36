//! Experiment runner, hyperparameter sweep and report generation.
//!
//! Everything is written below a results root:
//!
//! ```text
//! runs/<experiment>/seed-<n>/{config.toml, metrics.csv, checkpoint.json, summary.json}
//! sweeps/<sweep>/{ledger.jsonl, sweep.csv, table2.csv}
//! report/{table1.csv, table2.csv, table2_cells.csv, table3.csv, curves.csv}
//! ```

pub mod commands;
pub mod config;
pub mod experiment;
pub mod report;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{Backend, DataSource, ExperimentConfig, SweepConfig};
pub use experiment::{run_experiment, run_experiment_with, ExperimentOutcome, RunStatus, RunSummary};
pub use report::{report, ReportFiles};
pub use sweep::{run_sweep, CellRecord, CellStatus, SweepOutcome};

/// Environment variable naming the results root.
pub const RESULTS_ENV: &str = "QNLP_RESULTS_DIR";

pub fn results_root() -> PathBuf {
    std::env::var_os(RESULTS_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("results"))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Pipeline { stage: &'static str, message: String },
    #[error("no completed runs under {0}")]
    EmptyResults(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn pipeline(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Pipeline { stage, message: e.to_string() }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

/// Formats a metric for CSV output; missing values print as `NaN`.
pub(crate) fn fmt_metric(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.6}")
    }
}

/// Serde adapter writing NaN as the string `"NaN"` so JSON stays valid.
pub(crate) mod nan_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_nan() {
            s.serialize_str("NaN")
        } else {
            s.serialize_f64(*x)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) if s == "NaN" => Ok(f64::NAN),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"NaN\", got `{s}`"))),
        }
    }
}
