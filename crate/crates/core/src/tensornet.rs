//! Tensor-network ansätze: dense word tensors, copy-spider splits and matrix
//! product state chains, with exact contraction and hole gradients.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{validate, Diagram, Violation, WireDims};
use crate::symbol::Symbol;
use crate::tensor::DenseTensor;

#[derive(Debug, Error, PartialEq)]
pub enum TensorNetError {
    #[error("invalid diagram: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("no tensor for symbol {0}")]
    MissingParam(Symbol),
    #[error("tensor for {symbol} has shape {actual:?}, expected {expected:?}")]
    ShapeMismatch { symbol: Symbol, expected: Vec<usize>, actual: Vec<usize> },
    #[error("unknown tensor ansatz `{0}`")]
    UnknownAnsatz(String),
    #[error("bad tensor ansatz config: {0}")]
    BadConfig(String),
    #[error("json: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorAnsatz {
    Tensor,
    Spider,
    Mps,
}

impl TensorAnsatz {
    pub const ALL: [TensorAnsatz; 3] = [TensorAnsatz::Tensor, TensorAnsatz::Spider, TensorAnsatz::Mps];

    pub fn as_str(self) -> &'static str {
        match self {
            TensorAnsatz::Tensor => "tensor",
            TensorAnsatz::Spider => "spider",
            TensorAnsatz::Mps => "mps",
        }
    }
}

impl fmt::Display for TensorAnsatz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TensorAnsatz {
    type Err = TensorNetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| TensorNetError::UnknownAnsatz(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TensorAnsatzConfig {
    pub kind: TensorAnsatz,
    pub d_n: usize,
    pub d_s: usize,
    pub bond_dim: usize,
    pub max_legs: usize,
}

impl Default for TensorAnsatzConfig {
    fn default() -> Self {
        Self { kind: TensorAnsatz::Tensor, d_n: 2, d_s: 2, bond_dim: 2, max_legs: 2 }
    }
}

impl TensorAnsatzConfig {
    pub fn new(kind: TensorAnsatz) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn dims(&self) -> WireDims {
        WireDims { n: self.d_n, s: self.d_s }
    }

    pub fn check(&self) -> Result<(), TensorNetError> {
        if self.d_n < 2 || self.d_s < 2 {
            return Err(TensorNetError::BadConfig("wire dimensions must be at least 2".into()));
        }
        if self.bond_dim < 1 {
            return Err(TensorNetError::BadConfig("bond dimension must be at least 1".into()));
        }
        if self.max_legs < 2 {
            return Err(TensorNetError::BadConfig("max_legs must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    /// Trainable tensor; `symbol` indexes [`Network::symbols`].
    Param { symbol: usize, shape: Vec<usize> },
    /// Unnormalised `δ_ij`, from a cup or a cap.
    CupDelta { dim: usize },
    /// Generalised Kronecker delta.
    SpiderCopy { arity: usize, dim: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    #[serde(flatten)]
    pub kind: NodeKind,
    /// Edge bound to each leg.
    pub legs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<Node>,
    /// Dimension of each edge.
    pub edges: Vec<usize>,
    pub outputs: Vec<usize>,
    pub symbols: Vec<Symbol>,
}

impl Network {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, TensorNetError> {
        serde_json::from_str(text).map_err(|e| TensorNetError::Json(e.to_string()))
    }

    /// Every distinct symbol with the shape of its tensor.
    pub fn param_shapes(&self) -> Vec<(Symbol, Vec<usize>)> {
        let mut shapes: Vec<Option<Vec<usize>>> = vec![None; self.symbols.len()];
        for n in &self.nodes {
            if let NodeKind::Param { symbol, shape } = &n.kind {
                shapes[*symbol] = Some(shape.clone());
            }
        }
        self.symbols
            .iter()
            .cloned()
            .zip(shapes.into_iter().map(|s| s.expect("every symbol has a node")))
            .collect()
    }

    pub fn output_shape(&self) -> Vec<usize> {
        self.outputs.iter().map(|&e| self.edges[e]).collect()
    }

    fn new_edge(&mut self, dim: usize) -> usize {
        self.edges.push(dim);
        self.edges.len() - 1
    }
}

/// Shapes of the MPS chain replacing a tensor with legs `shape`.
pub fn mps_split(shape: &[usize], bond: usize) -> Vec<Vec<usize>> {
    let k = shape.len();
    if k < 3 {
        return vec![shape.to_vec()];
    }
    (0..k)
        .map(|i| match i {
            0 => vec![shape[0], bond],
            i if i == k - 1 => vec![bond, shape[i]],
            i => vec![bond, shape[i], bond],
        })
        .collect()
}

/// Leg groups of a spider split: chunks of `max_legs − 1` legs, each of
/// which gets one extra leg onto a shared copy spider. Tensors with at most
/// `max_legs` legs are left whole.
pub fn spider_split(n_legs: usize, max_legs: usize) -> Vec<Vec<usize>> {
    let legs: Vec<usize> = (0..n_legs).collect();
    if n_legs <= max_legs {
        return vec![legs];
    }
    legs.chunks(max_legs - 1).map(<[usize]>::to_vec).collect()
}

#[derive(Default)]
struct Interner {
    symbols: Vec<Symbol>,
    index: HashMap<Symbol, usize>,
}

impl Interner {
    fn get(&mut self, s: Symbol) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        self.symbols.push(s.clone());
        self.index.insert(s, self.symbols.len() - 1);
        self.symbols.len() - 1
    }
}

pub fn compile_network(d: &Diagram, cfg: &TensorAnsatzConfig) -> Result<Network, TensorNetError> {
    cfg.check()?;
    let v = validate(d);
    if !v.is_empty() {
        return Err(TensorNetError::Invalid(v));
    }
    let dims = cfg.dims();
    let mut net = Network {
        nodes: Vec::new(),
        edges: d.wires.iter().map(|w| dims.of(w.ty)).collect(),
        outputs: d.open_wires.clone(),
        symbols: Vec::new(),
    };
    let mut interner = Interner::default();
    let ins = d.box_inputs();
    let outs = d.box_outputs();
    for (bi, b) in d.boxes.iter().enumerate() {
        let legs: Vec<usize> = ins[bi].iter().chain(&outs[bi]).map(|w| w.expect("validated")).collect();
        let shape: Vec<usize> = legs.iter().map(|&e| net.edges[e]).collect();
        let fp = b.fingerprint();
        let mut param = |net: &mut Network, piece: usize, legs: Vec<usize>| {
            let shape = legs.iter().map(|&e| net.edges[e]).collect();
            let symbol = interner.get(Symbol::new(&b.name, &fp, piece));
            net.nodes.push(Node { kind: NodeKind::Param { symbol, shape }, legs });
        };
        match cfg.kind {
            TensorAnsatz::Mps if legs.len() >= 3 => {
                let k = legs.len();
                let bonds: Vec<usize> = (0..k - 1).map(|_| net.new_edge(cfg.bond_dim)).collect();
                for i in 0..k {
                    let mut l = Vec::with_capacity(3);
                    if i > 0 {
                        l.push(bonds[i - 1]);
                    }
                    l.push(legs[i]);
                    if i < k - 1 {
                        l.push(bonds[i]);
                    }
                    param(&mut net, i, l);
                }
            }
            TensorAnsatz::Spider if legs.len() > cfg.max_legs => {
                let groups = spider_split(legs.len(), cfg.max_legs);
                let spokes: Vec<usize> = groups.iter().map(|_| net.new_edge(cfg.d_n)).collect();
                for (g, group) in groups.iter().enumerate() {
                    let mut l: Vec<usize> = group.iter().map(|&i| legs[i]).collect();
                    l.push(spokes[g]);
                    param(&mut net, g, l);
                }
                net.nodes.push(Node {
                    kind: NodeKind::SpiderCopy { arity: spokes.len(), dim: cfg.d_n },
                    legs: spokes,
                });
            }
            _ => {
                debug_assert_eq!(shape, dims.box_shape(b));
                param(&mut net, 0, legs);
            }
        }
    }
    for pair in d.cups.iter().chain(&d.caps) {
        net.nodes.push(Node {
            kind: NodeKind::CupDelta { dim: net.edges[pair[0]] },
            legs: pair.to_vec(),
        });
    }
    net.symbols = interner.symbols;
    Ok(net)
}

/// Trainable tensors keyed by symbol, shared by every network of a corpus.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorParamStore {
    pub tensors: BTreeMap<Symbol, DenseTensor>,
}

#[derive(Serialize, Deserialize)]
struct StoreEntry {
    symbol: Symbol,
    tensor: DenseTensor,
}

impl Serialize for TensorParamStore {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.tensors.iter().map(|(k, v)| StoreEntry { symbol: k.clone(), tensor: v.clone() }))
    }
}

impl<'de> Deserialize<'de> for TensorParamStore {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let entries = Vec::<StoreEntry>::deserialize(d)?;
        Ok(Self { tensors: entries.into_iter().map(|e| (e.symbol, e.tensor)).collect() })
    }
}

impl TensorParamStore {
    /// Draws each tensor from `normal(0, 1/√fan_in)`, where `fan_in` is the
    /// product of all but the last dimension.
    pub fn init<R: Rng + ?Sized>(shapes: &[(Symbol, Vec<usize>)], rng: &mut R) -> Self {
        let mut tensors = BTreeMap::new();
        for (s, shape) in shapes {
            if tensors.contains_key(s) {
                continue;
            }
            let fan_in: usize = shape[..shape.len().saturating_sub(1)].iter().product();
            let std = 1.0 / (fan_in.max(1) as f64).sqrt();
            tensors.insert(s.clone(), DenseTensor::random_normal(shape, std, rng));
        }
        Self { tensors }
    }

    pub fn get(&self, s: &Symbol) -> Option<&DenseTensor> {
        self.tensors.get(s)
    }
}

type Labeled = (DenseTensor, Vec<usize>);

fn node_tensor(net: &Network, node: &Node, store: &TensorParamStore) -> Result<DenseTensor, TensorNetError> {
    match &node.kind {
        NodeKind::Param { symbol, shape } => {
            let s = &net.symbols[*symbol];
            let t = store.get(s).ok_or_else(|| TensorNetError::MissingParam(s.clone()))?;
            if t.shape() != shape.as_slice() {
                return Err(TensorNetError::ShapeMismatch {
                    symbol: s.clone(),
                    expected: shape.clone(),
                    actual: t.shape().to_vec(),
                });
            }
            Ok(t.clone())
        }
        NodeKind::CupDelta { dim } => Ok(DenseTensor::identity(*dim)),
        NodeKind::SpiderCopy { arity, dim } => Ok(DenseTensor::copy_spider(*arity, *dim)),
    }
}

/// Sums out repeated labels inside a single tensor.
fn self_trace((mut t, mut labels): Labeled) -> Labeled {
    'outer: loop {
        for i in 0..labels.len() {
            for j in i + 1..labels.len() {
                if labels[i] == labels[j] {
                    t = t.trace(i, j);
                    labels.remove(j);
                    labels.remove(i);
                    continue 'outer;
                }
            }
        }
        return (t, labels);
    }
}

fn merge(a: &Labeled, b: &Labeled) -> Labeled {
    let pairs: Vec<(usize, usize)> = a
        .1
        .iter()
        .enumerate()
        .filter_map(|(i, l)| b.1.iter().position(|m| m == l).map(|j| (i, j)))
        .collect();
    let t = a.0.contract(&b.0, &pairs);
    let labels = a
        .1
        .iter()
        .enumerate()
        .filter(|(i, _)| !pairs.iter().any(|p| p.0 == *i))
        .map(|(_, &l)| l)
        .chain(b.1.iter().enumerate().filter(|(j, _)| !pairs.iter().any(|p| p.1 == *j)).map(|(_, &l)| l))
        .collect();
    self_trace((t, labels))
}

/// Greedy pairwise contraction: always merges the connected pair with the
/// smallest result, falling back to an outer product of the two smallest
/// tensors. The result is permuted to `order`.
fn contract_all(items: Vec<Labeled>, dims: &[usize], order: &[usize]) -> DenseTensor {
    let mut items: Vec<Labeled> = items.into_iter().map(self_trace).collect();
    if items.is_empty() {
        items.push((DenseTensor::scalar(1.0), Vec::new()));
    }
    while items.len() > 1 {
        let size = |a: &Labeled, b: &Labeled| -> usize {
            a.1.iter()
                .chain(&b.1)
                .filter(|l| !(a.1.contains(l) && b.1.contains(l)))
                .map(|&l| dims[l])
                .product()
        };
        let mut best: Option<(usize, usize, usize)> = None;
        for i in 0..items.len() {
            for j in i + 1..items.len() {
                if !items[i].1.iter().any(|l| items[j].1.contains(l)) {
                    continue;
                }
                let s = size(&items[i], &items[j]);
                if best.is_none_or(|b| s < b.2) {
                    best = Some((i, j, s));
                }
            }
        }
        let (i, j) = best.map(|b| (b.0, b.1)).unwrap_or_else(|| {
            let mut idx: Vec<usize> = (0..items.len()).collect();
            idx.sort_by_key(|&k| items[k].0.len());
            (idx[0].min(idx[1]), idx[0].max(idx[1]))
        });
        let b = items.swap_remove(j);
        let a = items.swap_remove(i);
        items.push(merge(&a, &b));
    }
    let (t, labels) = items.pop().expect("one tensor left");
    let perm: Vec<usize> = order
        .iter()
        .map(|o| labels.iter().position(|l| l == o).expect("open label survives contraction"))
        .collect();
    t.permute(&perm)
}

fn labeled_nodes(net: &Network, store: &TensorParamStore, skip: Option<usize>) -> Result<Vec<Labeled>, TensorNetError> {
    net.nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(_, n)| Ok((node_tensor(net, n, store)?, n.legs.clone())))
        .collect()
}

/// Full contraction; the result is indexed by [`Network::outputs`].
pub fn contract(net: &Network, store: &TensorParamStore) -> Result<DenseTensor, TensorNetError> {
    Ok(contract_all(labeled_nodes(net, store, None)?, &net.edges, &net.outputs))
}

/// Gradient of `⟨upstream, contract(net)⟩` for every symbol of the network,
/// aligned with [`Network::symbols`]. Each Param node contributes the
/// contraction of the rest of the network with `upstream`.
pub fn gradient_hole(
    net: &Network,
    store: &TensorParamStore,
    upstream: &DenseTensor,
) -> Result<Vec<DenseTensor>, TensorNetError> {
    let mut grads: Vec<Option<DenseTensor>> = vec![None; net.symbols.len()];
    // Upstream sits on the output edges, so removing a node that owns an
    // output leg leaves that edge open on the upstream side.
    let mut items = labeled_nodes(net, store, None)?;
    items.push((upstream.clone(), net.outputs.clone()));
    for (i, node) in net.nodes.iter().enumerate() {
        let NodeKind::Param { symbol, .. } = node.kind else { continue };
        let rest: Vec<Labeled> = items
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, x)| x.clone())
            .collect();
        let g = contract_all(rest, &net.edges, &node.legs);
        match &mut grads[symbol] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }
    Ok(grads.into_iter().map(|g| g.expect("every symbol has a node")).collect())
}
