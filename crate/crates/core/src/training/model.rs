//! Trainable corpus models: every sentence compiled once, parameters shared
//! through one flat vector.

use std::collections::HashMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::data::{Dataset, LabeledSet};
use super::TrainError;
use crate::circuit::{build_circuit, Circuit, CircuitAnsatzConfig};
use crate::diagram::Diagram;
use crate::pregroup::{parse_sentence, Lexicon, PregroupType, SimpleType};
use crate::rewrite::{rewrite, RewriteScheme};
use crate::simulator::{gradient, sentence_distribution};
use crate::symbol::Symbol;
use crate::tensor::DenseTensor;
use crate::tensornet::{compile_network, contract, gradient_hole, Network, TensorAnsatzConfig, TensorParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub probs: [f64; 2],
    pub degenerate: bool,
}

/// A corpus model whose parameters live in one flat vector.
pub trait Model: Sync {
    fn n_params(&self) -> usize;
    fn init_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    fn len(&self, split: Split) -> usize;
    fn label(&self, split: Split, idx: usize) -> u8;
    fn forward(&self, split: Split, idx: usize, params: &[f64]) -> Result<Prediction, TrainError>;
    /// Adds `d(upstream · p)/d params` into `grad` and returns the prediction.
    fn backward(
        &self,
        split: Split,
        idx: usize,
        params: &[f64],
        upstream: [f64; 2],
        grad: &mut [f64],
    ) -> Result<Prediction, TrainError>;
    /// Flat-vector layout, for checkpoints: each symbol with its slot range.
    fn layout(&self) -> Vec<(Symbol, std::ops::Range<usize>)>;
}

/// Parses and rewrites every sentence of a labelled set.
pub fn diagrams(set: &LabeledSet, lexicon: &Lexicon, scheme: RewriteScheme) -> Result<Vec<Diagram>, TrainError> {
    let s = PregroupType::from(SimpleType::S);
    set.items
        .iter()
        .map(|item| {
            let d = parse_sentence(&item.words, lexicon, &s)?;
            Ok(rewrite(&d, scheme)?)
        })
        .collect()
}

struct CircuitUnit {
    circuit: Circuit,
    /// Flat parameter index of each local symbol.
    slots: Vec<usize>,
    label: u8,
}

pub struct CircuitModel {
    symbols: Vec<Symbol>,
    splits: [Vec<CircuitUnit>; 3],
}

impl CircuitModel {
    pub fn build(
        data: &Dataset,
        lexicon: &Lexicon,
        scheme: RewriteScheme,
        cfg: &CircuitAnsatzConfig,
    ) -> Result<Self, TrainError> {
        let compile = |set: &LabeledSet| -> Result<Vec<(Circuit, u8)>, TrainError> {
            let circuits = diagrams(set, lexicon, scheme)?
                .iter()
                .map(|d| build_circuit(d, cfg))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(circuits.into_iter().zip(set.items.iter().map(|i| i.label)).collect())
        };
        Self::from_circuits([compile(&data.train)?, compile(&data.dev)?, compile(&data.test)?])
    }

    /// Builds a model from pre-compiled `(circuit, label)` pairs for the
    /// train, dev and test splits.
    pub fn from_circuits(splits: [Vec<(Circuit, u8)>; 3]) -> Result<Self, TrainError> {
        let mut symbols = Vec::new();
        let mut index: HashMap<Symbol, usize> = HashMap::new();
        let splits = splits.map(|units| {
            units
                .into_iter()
                .map(|(circuit, label)| {
                    let slots = circuit
                        .symbols
                        .iter()
                        .map(|s| {
                            *index.entry(s.clone()).or_insert_with(|| {
                                symbols.push(s.clone());
                                symbols.len() - 1
                            })
                        })
                        .collect();
                    CircuitUnit { circuit, slots, label }
                })
                .collect()
        });
        if symbols.is_empty() {
            return Err(TrainError::ZeroParameterModel);
        }
        Ok(Self { symbols, splits })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn max_qubits(&self) -> usize {
        self.splits.iter().flatten().map(|u| u.circuit.n_qubits).max().unwrap_or(0)
    }

    fn unit(&self, split: Split, idx: usize) -> &CircuitUnit {
        &self.splits[split.index()][idx]
    }
}

impl Model for CircuitModel {
    fn n_params(&self) -> usize {
        self.symbols.len()
    }

    fn init_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.symbols.len()).map(|_| rng.random_range(0.0..TAU)).collect()
    }

    fn len(&self, split: Split) -> usize {
        self.splits[split.index()].len()
    }

    fn label(&self, split: Split, idx: usize) -> u8 {
        self.unit(split, idx).label
    }

    fn forward(&self, split: Split, idx: usize, params: &[f64]) -> Result<Prediction, TrainError> {
        let u = self.unit(split, idx);
        let local: Vec<f64> = u.slots.iter().map(|&s| params[s]).collect();
        let d = sentence_distribution(&u.circuit, &local)?;
        Ok(Prediction { probs: d.probs, degenerate: d.degenerate })
    }

    fn backward(
        &self,
        split: Split,
        idx: usize,
        params: &[f64],
        upstream: [f64; 2],
        grad: &mut [f64],
    ) -> Result<Prediction, TrainError> {
        let u = self.unit(split, idx);
        let local: Vec<f64> = u.slots.iter().map(|&s| params[s]).collect();
        let g = gradient(&u.circuit, &local, upstream)?;
        for (&slot, v) in u.slots.iter().zip(&g.grad) {
            grad[slot] += v;
        }
        Ok(Prediction { probs: g.distribution.probs, degenerate: g.distribution.degenerate })
    }

    fn layout(&self) -> Vec<(Symbol, std::ops::Range<usize>)> {
        self.symbols.iter().enumerate().map(|(i, s)| (s.clone(), i..i + 1)).collect()
    }
}

struct TensorUnit {
    net: Network,
    /// Position in [`TensorModel::symbols`] of each network symbol.
    slots: Vec<usize>,
    label: u8,
}

/// Tensor-network corpus model with a softmax readout over the two sentence
/// outcomes.
pub struct TensorModel {
    symbols: Vec<Symbol>,
    shapes: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    splits: [Vec<TensorUnit>; 3],
}

impl TensorModel {
    pub fn build(
        data: &Dataset,
        lexicon: &Lexicon,
        scheme: RewriteScheme,
        cfg: &TensorAnsatzConfig,
    ) -> Result<Self, TrainError> {
        if cfg.d_s != 2 {
            return Err(TrainError::BadReadout(cfg.d_s));
        }
        let mut nets = Vec::new();
        for set in [&data.train, &data.dev, &data.test] {
            let compiled = diagrams(set, lexicon, scheme)?
                .iter()
                .map(|d| compile_network(d, cfg))
                .collect::<Result<Vec<_>, _>>()?;
            nets.push(compiled.into_iter().zip(set.items.iter().map(|i| i.label)).collect::<Vec<_>>());
        }
        let mut symbols: Vec<Symbol> = Vec::new();
        let mut shapes: Vec<Vec<usize>> = Vec::new();
        let mut index: HashMap<Symbol, usize> = HashMap::new();
        let mut splits: [Vec<TensorUnit>; 3] = Default::default();
        for (split, units) in splits.iter_mut().zip(nets) {
            for (net, label) in units {
                if net.output_shape() != [2] {
                    return Err(TrainError::BadReadout(net.output_shape().iter().product()));
                }
                let slots = net
                    .param_shapes()
                    .into_iter()
                    .map(|(s, shape)| {
                        *index.entry(s.clone()).or_insert_with(|| {
                            symbols.push(s);
                            shapes.push(shape);
                            symbols.len() - 1
                        })
                    })
                    .collect();
                split.push(TensorUnit { net, slots, label });
            }
        }
        if symbols.is_empty() {
            return Err(TrainError::ZeroParameterModel);
        }
        let mut offsets = vec![0];
        for s in &shapes {
            offsets.push(offsets.last().unwrap() + s.iter().product::<usize>());
        }
        Ok(Self { symbols, shapes, offsets, splits })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    fn unit(&self, split: Split, idx: usize) -> &TensorUnit {
        &self.splits[split.index()][idx]
    }

    fn store(&self, u: &TensorUnit, params: &[f64]) -> TensorParamStore {
        let mut store = TensorParamStore::default();
        for &slot in &u.slots {
            let data = params[self.offsets[slot]..self.offsets[slot + 1]].to_vec();
            let t = DenseTensor::from_vec(&self.shapes[slot], data).expect("offsets match shapes");
            store.tensors.insert(self.symbols[slot].clone(), t);
        }
        store
    }
}

fn softmax(out: &DenseTensor) -> [f64; 2] {
    let (a, b) = (out.data()[0], out.data()[1]);
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    [ea / (ea + eb), eb / (ea + eb)]
}

impl Model for TensorModel {
    fn n_params(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn init_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let shapes: Vec<(Symbol, Vec<usize>)> =
            self.symbols.iter().cloned().zip(self.shapes.iter().cloned()).collect();
        let store = TensorParamStore::init(&shapes, rng);
        self.symbols.iter().flat_map(|s| store.tensors[s].data().to_vec()).collect()
    }

    fn len(&self, split: Split) -> usize {
        self.splits[split.index()].len()
    }

    fn label(&self, split: Split, idx: usize) -> u8 {
        self.unit(split, idx).label
    }

    fn forward(&self, split: Split, idx: usize, params: &[f64]) -> Result<Prediction, TrainError> {
        let u = self.unit(split, idx);
        let out = contract(&u.net, &self.store(u, params))?;
        Ok(Prediction { probs: softmax(&out), degenerate: false })
    }

    fn backward(
        &self,
        split: Split,
        idx: usize,
        params: &[f64],
        upstream: [f64; 2],
        grad: &mut [f64],
    ) -> Result<Prediction, TrainError> {
        let u = self.unit(split, idx);
        let store = self.store(u, params);
        let p = softmax(&contract(&u.net, &store)?);
        let dot = upstream[0] * p[0] + upstream[1] * p[1];
        let up = DenseTensor::from_vec(&[2], vec![p[0] * (upstream[0] - dot), p[1] * (upstream[1] - dot)])
            .expect("two outcomes");
        let grads = gradient_hole(&u.net, &store, &up)?;
        for (&slot, g) in u.slots.iter().zip(&grads) {
            for (acc, v) in grad[self.offsets[slot]..self.offsets[slot + 1]].iter_mut().zip(g.data()) {
                *acc += v;
            }
        }
        Ok(Prediction { probs: p, degenerate: false })
    }

    fn layout(&self) -> Vec<(Symbol, std::ops::Range<usize>)> {
        self.symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), self.offsets[i]..self.offsets[i + 1]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitAnsatz;
    use crate::tensornet::TensorAnsatz;
    use crate::training::data::{generate_mc, mc_lexicon};
    use rand::SeedableRng;

    fn check_gradients<M: Model>(m: &M, params: &[f64], tol: f64) {
        let up = [0.4, -1.3];
        for idx in 0..m.len(Split::Train).min(6) {
            let mut grad = vec![0.0; m.n_params()];
            m.backward(Split::Train, idx, params, up, &mut grad).unwrap();
            for k in 0..params.len() {
                let f = |d: f64| {
                    let mut p = params.to_vec();
                    p[k] += d;
                    let q = m.forward(Split::Train, idx, &p).unwrap().probs;
                    up[0] * q[0] + up[1] * q[1]
                };
                let h = 1e-5;
                let fd = (f(h) - f(-h)) / (2.0 * h);
                assert!((grad[k] - fd).abs() <= tol * grad[k].abs().max(fd.abs()).max(1e-3), "{} vs {fd}", grad[k]);
            }
        }
    }

    #[test]
    fn circuit_model_shares_weights_and_differentiates() {
        let data = generate_mc(3, (12, 4, 4)).unwrap();
        let cfg = CircuitAnsatzConfig::new(CircuitAnsatz::Sim14, 1, 3);
        let m = CircuitModel::build(&data, &mc_lexicon(), RewriteScheme::ReNormCurNorm, &cfg).unwrap();
        assert!(m.n_params() > 0);
        assert!(m.max_qubits() <= 8);
        let params = m.init_params(&mut ChaCha8Rng::seed_from_u64(0));
        check_gradients(&m, &params, 1e-5);
    }

    #[test]
    fn tensor_model_differentiates() {
        let data = generate_mc(3, (12, 4, 4)).unwrap();
        for kind in TensorAnsatz::ALL {
            let m = TensorModel::build(&data, &mc_lexicon(), RewriteScheme::Re, &TensorAnsatzConfig::new(kind)).unwrap();
            let params = m.init_params(&mut ChaCha8Rng::seed_from_u64(1));
            assert_eq!(params.len(), m.n_params());
            check_gradients(&m, &params, 1e-5);
        }
    }

    #[test]
    fn zero_parameter_corpus_is_rejected() {
        let data = generate_mc(3, (12, 4, 4)).unwrap();
        let cfg = CircuitAnsatzConfig::new(CircuitAnsatz::Iqp, 0, 0);
        let err = CircuitModel::build(&data, &mc_lexicon(), RewriteScheme::Re, &cfg).err().unwrap();
        assert!(matches!(err, TrainError::ZeroParameterModel));
    }
}
