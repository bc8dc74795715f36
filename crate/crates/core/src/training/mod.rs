//! Loss, metrics, optimisers and the full-batch fit loop.

pub mod data;
pub mod model;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::CircuitError;
use crate::pregroup::ParseError;
use crate::rewrite::RewriteError;
use crate::simulator::SimError;
use crate::tensornet::TensorNetError;

pub use data::{generate_mc, load_tsv, mc_lexicon, parse_tsv, DataError, Dataset, Item, LabeledSet};
pub use model::{CircuitModel, Model, Prediction, Split, TensorModel};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("the model has no trainable parameters")]
    ZeroParameterModel,
    #[error("loss is not finite at epoch {epoch} ({split}): {value}")]
    NonFiniteLoss { epoch: usize, split: &'static str, value: f64 },
    #[error("cannot evaluate an empty set")]
    EmptyEvalSet,
    #[error("history has {have} epochs, summary needs {need}")]
    TooFewEpochs { have: usize, need: usize },
    #[error("tensor readout needs a 2-dimensional sentence wire, got {0}")]
    BadReadout(usize),
    #[error("time budget exhausted after {0} epochs")]
    BudgetExceeded(usize),
    #[error("epochs must be at least 1")]
    NoEpochs,
    #[error("parse: {0}")]
    Parse(#[from] ParseError),
    #[error("rewrite: {0}")]
    Rewrite(#[from] RewriteError),
    #[error("compile: {0}")]
    Circuit(CircuitError),
    #[error("simulate: {0}")]
    Sim(#[from] SimError),
    #[error("tensor network: {0}")]
    TensorNet(#[from] TensorNetError),
    #[error("data: {0}")]
    Data(#[from] DataError),
}

impl From<CircuitError> for TrainError {
    fn from(e: CircuitError) -> Self {
        match e {
            CircuitError::ZeroParameterModel => TrainError::ZeroParameterModel,
            e => TrainError::Circuit(e),
        }
    }
}

pub const PROB_CLIP: f64 = 1e-7;

/// Binary cross-entropy of a two-outcome distribution against `label`.
pub fn bce_loss(probs: [f64; 2], label: u8) -> f64 {
    let p = probs[label as usize].clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    -p.ln()
}

/// `d bce / d probs` of the unclipped loss. The clip only bounds reported
/// losses; a confidently wrong prediction still gets a gradient.
fn bce_grad(probs: [f64; 2], label: u8) -> [f64; 2] {
    let mut g = [0.0; 2];
    g[label as usize] = -1.0 / probs[label as usize].max(f64::MIN_POSITIVE);
    g
}

pub fn predict(probs: [f64; 2]) -> u8 {
    u8::from(probs[1] > probs[0])
}

pub fn accuracy(dists: &[[f64; 2]], labels: &[u8]) -> Result<f64, TrainError> {
    if dists.is_empty() {
        return Err(TrainError::EmptyEvalSet);
    }
    let correct = dists.iter().zip(labels).filter(|(d, &y)| predict(**d) == y).count();
    Ok(correct as f64 / dists.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    /// `a_k = a / (A + k + 1)^alpha`, `c_k = c / (k + 1)^gamma`; `A`
    /// defaults to a hundredth of the epoch count.
    Spsa { a: f64, c: f64, big_a: Option<f64>, alpha: f64, gamma: f64 },
    AdaptiveGd { lr: f64, beta1: f64, beta2: f64 },
}

impl OptimizerConfig {
    pub fn spsa() -> Self {
        OptimizerConfig::Spsa { a: 0.1, c: 0.1, big_a: None, alpha: 0.602, gamma: 0.101 }
    }

    pub fn adaptive() -> Self {
        OptimizerConfig::AdaptiveGd { lr: 0.05, beta1: 0.9, beta2: 0.999 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    /// Abort with [`TrainError::BudgetExceeded`] once this instant passes.
    #[serde(skip)]
    pub deadline: Option<Instant>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 120, seed: 0, optimizer: OptimizerConfig::spsa(), deadline: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochMetrics>,
    pub test_loss: f64,
    pub test_acc: f64,
    /// Predictions that fell back to uniform because postselection failed.
    pub degenerate: usize,
}

impl History {
    /// First epoch (1-based) whose validation accuracy is 1.
    pub fn first_perfect_val_epoch(&self) -> Option<usize> {
        self.epochs.iter().position(|e| e.val_acc >= 1.0).map(|i| i + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

/// Means over the final `last_k` epochs.
pub fn summarize(h: &History, last_k: usize) -> Result<Summary, TrainError> {
    if h.epochs.len() < last_k || last_k == 0 {
        return Err(TrainError::TooFewEpochs { have: h.epochs.len(), need: last_k.max(1) });
    }
    let tail = &h.epochs[h.epochs.len() - last_k..];
    let mean = |f: fn(&EpochMetrics) -> f64| tail.iter().map(f).sum::<f64>() / last_k as f64;
    Ok(Summary {
        train_loss: mean(|e| e.train_loss),
        val_loss: mean(|e| e.val_loss),
        train_acc: mean(|e| e.train_acc),
        val_acc: mean(|e| e.val_acc),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fitted {
    pub history: History,
    pub params: Vec<f64>,
}

struct Eval {
    loss: f64,
    acc: f64,
    degenerate: usize,
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Dev => "dev",
        Split::Test => "test",
    }
}

/// Mean loss and accuracy over a split. Sentences run in parallel, the sums
/// are taken in order so results do not depend on scheduling.
pub fn evaluate<M: Model>(model: &M, split: Split, params: &[f64]) -> Result<(f64, f64), TrainError> {
    let e = eval(model, split, params)?;
    Ok((e.loss, e.acc))
}

fn eval<M: Model>(model: &M, split: Split, params: &[f64]) -> Result<Eval, TrainError> {
    let n = model.len(split);
    let preds = (0..n)
        .into_par_iter()
        .map(|i| model.forward(split, i, params))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<u8> = (0..n).map(|i| model.label(split, i)).collect();
    let dists: Vec<[f64; 2]> = preds.iter().map(|p| p.probs).collect();
    let acc = accuracy(&dists, &labels)?;
    let loss = dists.iter().zip(&labels).map(|(d, &y)| bce_loss(*d, y)).sum::<f64>() / n as f64;
    Ok(Eval { loss, acc, degenerate: preds.iter().filter(|p| p.degenerate).count() })
}

fn mean_loss<M: Model>(model: &M, params: &[f64]) -> Result<f64, TrainError> {
    Ok(eval(model, Split::Train, params)?.loss)
}

fn loss_and_grad<M: Model>(model: &M, params: &[f64]) -> Result<(f64, Vec<f64>), TrainError> {
    let n = model.len(Split::Train);
    if n == 0 {
        return Err(TrainError::EmptyEvalSet);
    }
    let parts = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = vec![0.0; params.len()];
            let label = model.label(Split::Train, i);
            // The upstream needs the prediction, so run forward first.
            let p = model.forward(Split::Train, i, params)?;
            model.backward(Split::Train, i, params, bce_grad(p.probs, label), &mut g)?;
            Ok((bce_loss(p.probs, label), g))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let scale = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    /// Bias-corrected update for step `t ≥ 1`.
    fn update(&mut self, params: &mut [f64], grad: &[f64], t: i32) {
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / (1.0 - self.beta1.powi(t));
            let vh = self.v[i] / (1.0 - self.beta2.powi(t));
            params[i] -= self.lr * mh / (vh.sqrt() + 1e-8);
        }
    }
}

enum Optimizer {
    Spsa { a: f64, c: f64, big_a: f64, alpha: f64, gamma: f64 },
    Adam(Adam),
}

impl Optimizer {
    fn new(cfg: &TrainConfig, n: usize) -> Self {
        match cfg.optimizer {
            OptimizerConfig::Spsa { a, c, big_a, alpha, gamma } => Optimizer::Spsa {
                a,
                c,
                big_a: big_a.unwrap_or(0.01 * cfg.epochs as f64),
                alpha,
                gamma,
            },
            OptimizerConfig::AdaptiveGd { lr, beta1, beta2 } => {
                Optimizer::Adam(Adam { lr, beta1, beta2, m: vec![0.0; n], v: vec![0.0; n] })
            }
        }
    }

    fn step<M: Model>(&mut self, model: &M, params: &mut [f64], k: usize, rng: &mut ChaCha8Rng) -> Result<f64, TrainError> {
        match self {
            Optimizer::Spsa { a, c, big_a, alpha, gamma } => {
                let ak = *a / (*big_a + k as f64 + 1.0).powf(*alpha);
                let ck = *c / (k as f64 + 1.0).powf(*gamma);
                let delta: Vec<f64> = (0..params.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                let plus: Vec<f64> = params.iter().zip(&delta).map(|(p, d)| p + ck * d).collect();
                let minus: Vec<f64> = params.iter().zip(&delta).map(|(p, d)| p - ck * d).collect();
                let (lp, lm) = (mean_loss(model, &plus)?, mean_loss(model, &minus)?);
                let g = (lp - lm) / (2.0 * ck);
                for (p, d) in params.iter_mut().zip(&delta) {
                    *p -= ak * g * d;
                }
                Ok(0.5 * (lp + lm))
            }
            Optimizer::Adam(adam) => {
                let (loss, grad) = loss_and_grad(model, params)?;
                adam.update(params, &grad, k as i32 + 1);
                Ok(loss)
            }
        }
    }
}

/// Trains from a seeded initialisation. Each epoch takes one optimiser step
/// on the full training set and then evaluates train and dev at the new
/// parameters; the test set is evaluated once at the end.
pub fn fit<M: Model>(model: &M, cfg: &TrainConfig) -> Result<Fitted, TrainError> {
    if cfg.epochs == 0 {
        return Err(TrainError::NoEpochs);
    }
    if model.n_params() == 0 {
        return Err(TrainError::ZeroParameterModel);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = model.init_params(&mut rng);
    let mut opt = Optimizer::new(cfg, params.len());
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut degenerate = 0;
    for k in 0..cfg.epochs {
        if cfg.deadline.is_some_and(|d| Instant::now() > d) {
            return Err(TrainError::BudgetExceeded(k));
        }
        let step_loss = opt.step(model, &mut params, k, &mut rng)?;
        if !step_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch: k + 1, split: "train", value: step_loss });
        }
        let train = eval(model, Split::Train, &params)?;
        let dev = eval(model, Split::Dev, &params)?;
        for (e, s) in [(&train, Split::Train), (&dev, Split::Dev)] {
            if !e.loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch: k + 1, split: split_name(s), value: e.loss });
            }
        }
        degenerate += train.degenerate + dev.degenerate;
        epochs.push(EpochMetrics { train_loss: train.loss, val_loss: dev.loss, train_acc: train.acc, val_acc: dev.acc });
    }
    let test = eval(model, Split::Test, &params)?;
    degenerate += test.degenerate;
    Ok(Fitted {
        history: History { epochs, test_loss: test.loss, test_acc: test.acc, degenerate },
        params,
    })
}
