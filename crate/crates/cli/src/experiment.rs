//! One experiment: data, parse, rewrite, compile, then one fit per seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use qnlp_core::pregroup::Lexicon;
use qnlp_core::symbol::Symbol;
use qnlp_core::training::{
    fit, generate_mc, load_tsv, mc_lexicon, summarize, CircuitModel, Dataset, History, Model, TensorModel,
    TrainConfig, TrainError,
};
use serde::{Deserialize, Serialize};

use crate::config::{Backend, DataSource, ExperimentConfig};
use crate::{io_err, nan_f64, CliError};

/// Epochs averaged for the headline summary.
pub const SUMMARY_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// The configuration has no trainable parameters; metrics are NaN.
    ZeroParameter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub name: String,
    pub seed: u64,
    pub status: RunStatus,
    pub n_params: usize,
    pub epochs: usize,
    #[serde(with = "nan_f64")]
    pub train_loss: f64,
    #[serde(with = "nan_f64")]
    pub val_loss: f64,
    #[serde(with = "nan_f64")]
    pub train_acc: f64,
    #[serde(with = "nan_f64")]
    pub val_acc: f64,
    #[serde(with = "nan_f64")]
    pub test_loss: f64,
    #[serde(with = "nan_f64")]
    pub test_acc: f64,
    pub first_perfect_val_epoch: Option<usize>,
    pub degenerate: usize,
    pub elapsed_secs: f64,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub summary: RunSummary,
    pub history: Option<History>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub runs: Vec<SeedRun>,
}

impl ExperimentOutcome {
    /// Mean test accuracy over seeds; NaN for parameter-free models.
    pub fn mean_test_acc(&self) -> f64 {
        self.runs.iter().map(|r| r.summary.test_acc).sum::<f64>() / self.runs.len() as f64
    }

    pub fn run_ids(&self) -> Vec<String> {
        self.runs.iter().map(|r| r.summary.run_id.clone()).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct MetricsRow {
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
    train_acc: f64,
    val_acc: f64,
}

#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub symbols: Vec<Symbol>,
    pub values: Vec<Vec<f64>>,
    pub config: ExperimentConfig,
    pub epoch: usize,
}

pub fn run_id(name: &str, seed: u64) -> String {
    format!("{name}/seed-{seed}")
}

pub fn run_dir(root: &Path, name: &str, seed: u64) -> PathBuf {
    root.join("runs").join(name).join(format!("seed-{seed}"))
}

pub fn load_data(source: &DataSource) -> Result<(Dataset, Lexicon), CliError> {
    match source {
        DataSource::Generate { seed, train, dev, test } => {
            let data = generate_mc(*seed, (*train, *dev, *test)).map_err(|e| CliError::pipeline("data", e))?;
            Ok((data, mc_lexicon()))
        }
        DataSource::Files { train, dev, test, lexicon } => {
            let load = |p: &PathBuf, name| load_tsv(p, name).map_err(|e| CliError::pipeline("data", format!("{}: {e}", p.display())));
            let data = Dataset { train: load(train, "train")?, dev: load(dev, "dev")?, test: load(test, "test")? };
            let lexicon = match lexicon {
                Some(p) => Lexicon::load(p).map_err(|e| CliError::pipeline("data", e))?,
                None => mc_lexicon(),
            };
            Ok((data, lexicon))
        }
    }
}

fn build_stage(e: &TrainError) -> &'static str {
    match e {
        TrainError::Parse(_) => "parse",
        TrainError::Rewrite(_) => "rewrite",
        TrainError::Circuit(_) | TrainError::TensorNet(_) | TrainError::BadReadout(_) => "compile",
        _ => "build",
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<ExperimentOutcome, CliError> {
    run_experiment_with(cfg, root, None)
}

/// Runs every seed of `cfg`; with a budget each seed must finish within it.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    root: &Path,
    budget: Option<Duration>,
) -> Result<ExperimentOutcome, CliError> {
    cfg.validate()?;
    let (data, lexicon) = load_data(&cfg.data)?;
    let built = match &cfg.backend {
        Backend::Circuit(a) => CircuitModel::build(&data, &lexicon, cfg.scheme, a).map(Built::Circuit),
        Backend::Tensor(a) => TensorModel::build(&data, &lexicon, cfg.scheme, a).map(Built::Tensor),
    };
    let built = match built {
        Ok(b) => Some(b),
        Err(TrainError::ZeroParameterModel) => None,
        Err(e) => return Err(CliError::pipeline(build_stage(&e), e)),
    };
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let dir = run_dir(root, &cfg.name, seed);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write(&dir.join("config.toml"), &cfg.to_toml())?;
        let run = match &built {
            None => zero_parameter_run(cfg, seed),
            Some(Built::Circuit(m)) => fit_seed(m, cfg, seed, &dir, budget)?,
            Some(Built::Tensor(m)) => fit_seed(m, cfg, seed, &dir, budget)?,
        };
        let json = serde_json::to_string_pretty(&run.summary).expect("summary serialises");
        write(&dir.join("summary.json"), &json)?;
        runs.push(run);
    }
    Ok(ExperimentOutcome { runs })
}

enum Built {
    Circuit(CircuitModel),
    Tensor(TensorModel),
}

fn base_summary(cfg: &ExperimentConfig, seed: u64) -> RunSummary {
    RunSummary {
        run_id: run_id(&cfg.name, seed),
        name: cfg.name.clone(),
        seed,
        status: RunStatus::ZeroParameter,
        n_params: 0,
        epochs: 0,
        train_loss: f64::NAN,
        val_loss: f64::NAN,
        train_acc: f64::NAN,
        val_acc: f64::NAN,
        test_loss: f64::NAN,
        test_acc: f64::NAN,
        first_perfect_val_epoch: None,
        degenerate: 0,
        elapsed_secs: 0.0,
        config: cfg.clone(),
    }
}

fn zero_parameter_run(cfg: &ExperimentConfig, seed: u64) -> SeedRun {
    SeedRun { summary: base_summary(cfg, seed), history: None }
}

fn fit_seed<M: Model>(
    model: &M,
    cfg: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    budget: Option<Duration>,
) -> Result<SeedRun, CliError> {
    let start = Instant::now();
    let train = TrainConfig { epochs: cfg.epochs, seed, optimizer: cfg.optimizer(), deadline: budget.map(|b| start + b) };
    let fitted = fit(model, &train).map_err(|e| match e {
        TrainError::BudgetExceeded(k) => CliError::pipeline("budget", format!("exceeded after {k} epochs")),
        e => CliError::pipeline("train", e),
    })?;
    let elapsed_secs = start.elapsed().as_secs_f64();
    let h = fitted.history;

    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, e) in h.epochs.iter().enumerate() {
        w.serialize(MetricsRow { epoch: i + 1, train_loss: e.train_loss, val_loss: e.val_loss, train_acc: e.train_acc, val_acc: e.val_acc })
            .expect("in-memory csv");
    }
    write(&dir.join("metrics.csv"), &String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8"))?;

    let layout = model.layout();
    let checkpoint = Checkpoint {
        symbols: layout.iter().map(|(s, _)| s.clone()).collect(),
        values: layout.iter().map(|(_, r)| fitted.params[r.clone()].to_vec()).collect(),
        config: cfg.clone(),
        epoch: h.epochs.len(),
    };
    write(&dir.join("checkpoint.json"), &serde_json::to_string(&checkpoint).expect("checkpoint serialises"))?;

    let s = summarize(&h, SUMMARY_WINDOW.min(h.epochs.len())).map_err(|e| CliError::pipeline("train", e))?;
    let summary = RunSummary {
        status: RunStatus::Ok,
        n_params: model.n_params(),
        epochs: h.epochs.len(),
        train_loss: s.train_loss,
        val_loss: s.val_loss,
        train_acc: s.train_acc,
        val_acc: s.val_acc,
        test_loss: h.test_loss,
        test_acc: h.test_acc,
        first_perfect_val_epoch: h.first_perfect_val_epoch(),
        degenerate: h.degenerate,
        elapsed_secs,
        ..base_summary(cfg, seed)
    };
    Ok(SeedRun { summary, history: Some(h) })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_summary(path: &Path) -> Result<RunSummary, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::pipeline("report", format!("{}: {e}", path.display())))
}

/// Per-epoch metrics of a finished run, in epoch order.
pub fn read_metrics(path: &Path) -> Result<Vec<[f64; 4]>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::pipeline("report", format!("{}: {e}", path.display())))?;
    r.deserialize::<MetricsRow>()
        .map(|row| {
            row.map(|m| [m.train_loss, m.val_loss, m.train_acc, m.val_acc])
                .map_err(|e| CliError::pipeline("report", format!("{}: {e}", path.display())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use qnlp_core::circuit::{CircuitAnsatz, CircuitAnsatzConfig};
    use qnlp_core::rewrite::RewriteScheme;

    fn small(name: &str, layers: usize, rot: usize) -> ExperimentConfig {
        ExperimentConfig {
            epochs: 3,
            data: DataSource::Generate { seed: 1, train: 10, dev: 4, test: 4 },
            ..ExperimentConfig::circuit(name, RewriteScheme::ReNormCurNorm, CircuitAnsatzConfig::new(CircuitAnsatz::Iqp, layers, rot))
        }
    }

    #[test]
    fn zero_parameter_summary_is_nan() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&small("zero", 0, 0), dir.path()).unwrap();
        assert!(out.mean_test_acc().is_nan());
        let text = fs::read_to_string(dir.path().join("runs/zero/seed-0/summary.json")).unwrap();
        assert!(text.contains(r#""test_acc": "NaN""#), "{text}");
        let back = read_summary(&dir.path().join("runs/zero/seed-0/summary.json")).unwrap();
        assert_eq!(back.status, RunStatus::ZeroParameter);
        assert!(back.val_acc.is_nan());
    }

    #[test]
    fn artifacts_are_written_and_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = small("tiny", 1, 1);
        let out = run_experiment(&cfg, a.path()).unwrap();
        run_experiment(&cfg, b.path()).unwrap();
        let dir = run_dir(a.path(), "tiny", 0);
        let metrics = fs::read(dir.join("metrics.csv")).unwrap();
        assert_eq!(metrics, fs::read(run_dir(b.path(), "tiny", 0).join("metrics.csv")).unwrap());
        assert_eq!(read_metrics(&dir.join("metrics.csv")).unwrap().len(), 3);
        let ck: Checkpoint = serde_json::from_str(&fs::read_to_string(dir.join("checkpoint.json")).unwrap()).unwrap();
        assert_eq!(ck.epoch, 3);
        assert_eq!(ck.symbols.len(), ck.values.len());
        assert_eq!(ck.values.iter().map(Vec::len).sum::<usize>(), out.runs[0].summary.n_params);
        assert_eq!(ExperimentConfig::from_toml(&fs::read_to_string(dir.join("config.toml")).unwrap()).unwrap(), cfg);
    }

    #[test]
    fn unknown_word_is_a_parse_stage_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("train.tsv"), "1\tman cooks zebra\n").unwrap();
        let p = dir.path().join("train.tsv");
        let cfg = ExperimentConfig {
            data: DataSource::Files { train: p.clone(), dev: p.clone(), test: p, lexicon: None },
            ..small("bad", 1, 1)
        };
        match run_experiment(&cfg, dir.path()) {
            Err(e @ CliError::Pipeline { stage: "parse", .. }) => assert_eq!(e.exit_code(), 3),
            other => panic!("{other:?}"),
        }
    }
}
