//! Declarative experiment and sweep descriptions (TOML).

use std::path::{Path, PathBuf};

use qnlp_core::circuit::{CircuitAnsatz, CircuitAnsatzConfig};
use qnlp_core::rewrite::RewriteScheme;
use qnlp_core::tensornet::TensorAnsatzConfig;
use qnlp_core::training::OptimizerConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Backend {
    Circuit(CircuitAnsatzConfig),
    Tensor(TensorAnsatzConfig),
}

impl Backend {
    pub fn family(&self) -> &'static str {
        match self {
            Backend::Circuit(_) => "circuit",
            Backend::Tensor(_) => "tensor",
        }
    }

    pub fn ansatz_name(&self) -> &'static str {
        match self {
            Backend::Circuit(c) => c.kind.as_str(),
            Backend::Tensor(t) => t.kind.as_str(),
        }
    }

    pub fn default_optimizer(&self) -> OptimizerConfig {
        match self {
            Backend::Circuit(_) => OptimizerConfig::spsa(),
            Backend::Tensor(_) => OptimizerConfig::adaptive(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// The built-in two-topic corpus and lexicon.
    Generate { seed: u64, train: usize, dev: usize, test: usize },
    /// TSV splits; without a lexicon file the built-in lexicon is used.
    Files { train: PathBuf, dev: PathBuf, test: PathBuf, lexicon: Option<PathBuf> },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Generate { seed: 0, train: 70, dev: 30, test: 30 }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_epochs() -> usize {
    120
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub scheme: RewriteScheme,
    pub backend: Backend,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub data: DataSource,
    /// SPSA for circuits and adaptive gradient descent for tensors when unset.
    #[serde(default)]
    pub optimizer: Option<OptimizerConfig>,
}

impl ExperimentConfig {
    pub fn circuit(name: &str, scheme: RewriteScheme, ansatz: CircuitAnsatzConfig) -> Self {
        Self {
            name: name.to_string(),
            scheme,
            backend: Backend::Circuit(ansatz),
            seeds: default_seeds(),
            epochs: default_epochs(),
            data: DataSource::default(),
            optimizer: None,
        }
    }

    pub fn tensor(name: &str, scheme: RewriteScheme, ansatz: TensorAnsatzConfig) -> Self {
        Self { backend: Backend::Tensor(ansatz), ..Self::circuit(name, scheme, CircuitAnsatzConfig::default()) }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        self.optimizer.unwrap_or_else(|| self.backend.default_optimizer())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check_name(&self.name)?;
        if self.seeds.is_empty() {
            return Err(CliError::Config("`seeds` must not be empty".into()));
        }
        if self.epochs == 0 {
            return Err(CliError::Config("`epochs` must be at least 1".into()));
        }
        match &self.backend {
            Backend::Circuit(c) if c.qubits_n == 0 || c.qubits_s == 0 => {
                Err(CliError::Config("qubit counts per wire must be at least 1".into()))
            }
            Backend::Circuit(_) => Ok(()),
            Backend::Tensor(t) => t.check().map_err(|e| CliError::Config(e.to_string())),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serialises")
    }
}

pub(crate) fn check_name(name: &str) -> Result<(), CliError> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("name `{name}` must be non-empty and use only [A-Za-z0-9._-]")))
    }
}

/// Grid of circuit experiments, one cell per (ansatz, layers, rotations).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub name: String,
    pub scheme: RewriteScheme,
    pub ansatze: Vec<CircuitAnsatz>,
    pub layers: Vec<usize>,
    pub rotations: Vec<usize>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub data: DataSource,
    pub optimizer: Option<OptimizerConfig>,
    /// Wall-clock limit per cell, in seconds.
    pub budget_secs: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            name: "table2".into(),
            scheme: RewriteScheme::ReNormCurNorm,
            ansatze: CircuitAnsatz::ALL.to_vec(),
            layers: (0..=4).collect(),
            rotations: (0..=4).collect(),
            seeds: default_seeds(),
            epochs: default_epochs(),
            data: DataSource::default(),
            optimizer: None,
            budget_secs: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_name(&self.name)?;
        if self.ansatze.is_empty() || self.layers.is_empty() || self.rotations.is_empty() {
            return Err(CliError::Config("sweep grid has an empty axis".into()));
        }
        if self.seeds.is_empty() || self.epochs == 0 {
            return Err(CliError::Config("sweep needs at least one seed and one epoch".into()));
        }
        if self.budget_secs.is_some_and(|b| !(b > 0.0)) {
            return Err(CliError::Config("`budget_secs` must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn cell_name(&self, ansatz: CircuitAnsatz, layers: usize, rotations: usize) -> String {
        format!("{}-{}-l{layers}-r{rotations}", self.name, ansatz.as_str())
    }

    pub fn cell_experiment(&self, ansatz: CircuitAnsatz, layers: usize, rotations: usize) -> ExperimentConfig {
        ExperimentConfig {
            name: self.cell_name(ansatz, layers, rotations),
            scheme: self.scheme,
            backend: Backend::Circuit(CircuitAnsatzConfig::new(ansatz, layers, rotations)),
            seeds: self.seeds.clone(),
            epochs: self.epochs,
            data: self.data.clone(),
            optimizer: self.optimizer,
        }
    }
}
