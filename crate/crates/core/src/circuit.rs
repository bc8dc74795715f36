//! Compilation of diagrams to parameterised circuits.
//!
//! Every wire gets `qubits_n` or `qubits_s` qubits. Word boxes become ansatz
//! blocks on fresh qubits, curried boxes act on the qubits of their inputs,
//! cups become a CNOT + H followed by postselection on `|00⟩` and caps
//! prepare a Bell pair.
//!
//! Block layouts, with `k` the block width and `L` the layer count:
//!
//! | ansatz              | `k = 1`                         | `k ≥ 2`, per layer                          | params/layer |
//! |---------------------|---------------------------------|---------------------------------------------|--------------|
//! | all                 | RX, RZ, RX, … (`n_single_qubit_params`) | –                                   | –            |
//! | IQP                 |                                 | H on all, CRZ on `(i, i+1)`                 | `k − 1`      |
//! | StronglyEntangling  |                                 | RZ·RY·RZ on all, CNOT ring `i → i+1 mod k`  | `3k`         |
//! | Sim14               |                                 | RY, CRX ring (reversed), RY, CRX ring       | `4k`         |
//! | Sim15               |                                 | RY, CNOT ring (reversed), RY, CNOT ring     | `2k`         |

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{validate, Diagram, NodeRef, Violation};
use crate::pregroup::{Base, SimpleType};
use crate::symbol::Symbol;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("invalid diagram: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("the model has no trainable parameters")]
    ZeroParameterModel,
    #[error("circuit needs {needed} qubits, limit is {limit}")]
    WidthOverflow { needed: usize, limit: usize },
    #[error("unknown circuit ansatz `{0}`")]
    UnknownAnsatz(String),
    #[error("json: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    RX,
    RY,
    RZ,
    CNOT,
    CRZ,
    CRX,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::RX | GateKind::RY | GateKind::RZ => 1,
            GateKind::CNOT | GateKind::CRZ | GateKind::CRX => 2,
        }
    }

    pub fn is_parameterised(self) -> bool {
        !matches!(self, GateKind::H | GateKind::CNOT)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Angle {
    /// Index into the circuit's symbol table.
    Symbol(usize),
    /// Fixed angle in radians.
    Const(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default)]
    pub param: Option<Angle>,
}

impl Gate {
    fn fixed(kind: GateKind, qubits: Vec<usize>) -> Self {
        Self { kind, qubits, param: None }
    }

    fn rotation(kind: GateKind, qubits: Vec<usize>, symbol: usize) -> Self {
        Self { kind, qubits, param: Some(Angle::Symbol(symbol)) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    /// Qubits projected onto `|0⟩` after the gates.
    pub postselect: Vec<usize>,
    #[serde(rename = "outputs")]
    pub output_qubits: Vec<usize>,
    pub symbols: Vec<Symbol>,
}

impl Circuit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, CircuitError> {
        serde_json::from_str(text).map_err(|e| CircuitError::Json(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitAnsatz {
    Iqp,
    StronglyEntangling,
    Sim14,
    Sim15,
}

impl CircuitAnsatz {
    pub const ALL: [CircuitAnsatz; 4] = [
        CircuitAnsatz::Iqp,
        CircuitAnsatz::StronglyEntangling,
        CircuitAnsatz::Sim14,
        CircuitAnsatz::Sim15,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CircuitAnsatz::Iqp => "iqp",
            CircuitAnsatz::StronglyEntangling => "strongly_entangling",
            CircuitAnsatz::Sim14 => "sim14",
            CircuitAnsatz::Sim15 => "sim15",
        }
    }

    /// Parameters per layer of a block on `k ≥ 2` qubits.
    pub fn params_per_layer(self, k: usize) -> usize {
        match self {
            CircuitAnsatz::Iqp => k - 1,
            CircuitAnsatz::StronglyEntangling => 3 * k,
            CircuitAnsatz::Sim14 => 4 * k,
            CircuitAnsatz::Sim15 => 2 * k,
        }
    }
}

impl fmt::Display for CircuitAnsatz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CircuitAnsatz {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| CircuitError::UnknownAnsatz(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CircuitAnsatzConfig {
    pub kind: CircuitAnsatz,
    pub n_layers: usize,
    pub n_single_qubit_params: usize,
    pub qubits_n: usize,
    pub qubits_s: usize,
    pub max_qubits: usize,
}

impl Default for CircuitAnsatzConfig {
    fn default() -> Self {
        Self {
            kind: CircuitAnsatz::Iqp,
            n_layers: 1,
            n_single_qubit_params: 3,
            qubits_n: 1,
            qubits_s: 1,
            max_qubits: 20,
        }
    }
}

impl CircuitAnsatzConfig {
    pub fn new(kind: CircuitAnsatz, n_layers: usize, n_single_qubit_params: usize) -> Self {
        Self { kind, n_layers, n_single_qubit_params, ..Self::default() }
    }

    pub fn qubits_for(&self, t: SimpleType) -> usize {
        match t.base {
            Base::N => self.qubits_n,
            Base::S => self.qubits_s,
        }
    }

    /// Parameter count of a block on `k` qubits.
    pub fn block_params(&self, k: usize) -> usize {
        match k {
            0 => 0,
            1 => self.n_single_qubit_params,
            _ => self.kind.params_per_layer(k) * self.n_layers,
        }
    }
}

/// Gates of one word block on local qubits `0..k`; rotation angles refer to
/// local parameter indices `0..n_params`.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub gates: Vec<Gate>,
    pub n_params: usize,
}

pub fn word_block(k: usize, cfg: &CircuitAnsatzConfig) -> Block {
    let mut gates = Vec::new();
    let mut next = 0usize;
    let mut param = || {
        next += 1;
        next - 1
    };
    if k == 1 {
        for i in 0..cfg.n_single_qubit_params {
            let kind = if i % 2 == 0 { GateKind::RX } else { GateKind::RZ };
            gates.push(Gate::rotation(kind, vec![0], param()));
        }
    } else if k >= 2 {
        let ring = |forward: bool| -> Vec<(usize, usize)> {
            if forward {
                (0..k).map(|i| (i, (i + 1) % k)).collect()
            } else {
                (0..k).rev().map(|i| (i, (i + 1) % k)).collect()
            }
        };
        for _ in 0..cfg.n_layers {
            match cfg.kind {
                CircuitAnsatz::Iqp => {
                    gates.extend((0..k).map(|q| Gate::fixed(GateKind::H, vec![q])));
                    for q in 0..k - 1 {
                        gates.push(Gate::rotation(GateKind::CRZ, vec![q, q + 1], param()));
                    }
                }
                CircuitAnsatz::StronglyEntangling => {
                    for q in 0..k {
                        for kind in [GateKind::RZ, GateKind::RY, GateKind::RZ] {
                            gates.push(Gate::rotation(kind, vec![q], param()));
                        }
                    }
                    gates.extend(ring(true).into_iter().map(|(c, t)| Gate::fixed(GateKind::CNOT, vec![c, t])));
                }
                CircuitAnsatz::Sim14 | CircuitAnsatz::Sim15 => {
                    let controlled = cfg.kind == CircuitAnsatz::Sim14;
                    for forward in [false, true] {
                        for q in 0..k {
                            gates.push(Gate::rotation(GateKind::RY, vec![q], param()));
                        }
                        for (c, t) in ring(forward) {
                            if controlled {
                                gates.push(Gate::rotation(GateKind::CRX, vec![c, t], param()));
                            } else {
                                gates.push(Gate::fixed(GateKind::CNOT, vec![c, t]));
                            }
                        }
                    }
                }
            }
        }
    }
    Block { gates, n_params: next }
}

/// Bell effect on `(q1, q2)`: CNOT, H, then postselect both onto `|0⟩`.
/// The surviving amplitude is `(ψ₀₀ + ψ₁₁)/√2`.
pub fn cup_block(q1: usize, q2: usize) -> (Vec<Gate>, [usize; 2]) {
    assert_ne!(q1, q2, "cup needs two distinct qubits");
    (
        vec![Gate::fixed(GateKind::CNOT, vec![q1, q2]), Gate::fixed(GateKind::H, vec![q1])],
        [q1, q2],
    )
}

/// Bell state `(|00⟩ + |11⟩)/√2` on fresh qubits.
pub fn cap_block(q1: usize, q2: usize) -> Vec<Gate> {
    vec![Gate::fixed(GateKind::H, vec![q1]), Gate::fixed(GateKind::CNOT, vec![q1, q2])]
}

#[derive(Default)]
struct SymbolTable {
    symbols: Vec<Symbol>,
    index: HashMap<Symbol, usize>,
}

impl SymbolTable {
    fn intern(&mut self, s: Symbol) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        self.symbols.push(s.clone());
        self.index.insert(s, self.symbols.len() - 1);
        self.symbols.len() - 1
    }
}

fn check(d: &Diagram) -> Result<Vec<NodeRef>, CircuitError> {
    let v = validate(d);
    if !v.is_empty() {
        return Err(CircuitError::Invalid(v));
    }
    Ok(d.schedule().expect("validated diagrams are acyclic"))
}

pub fn compile_circuit(d: &Diagram, cfg: &CircuitAnsatzConfig) -> Result<Circuit, CircuitError> {
    let c = build_circuit(d, cfg)?;
    if c.symbols.is_empty() {
        return Err(CircuitError::ZeroParameterModel);
    }
    Ok(c)
}

/// [`compile_circuit`] without the zero-parameter check, for corpora where
/// only the whole model needs parameters.
pub(crate) fn build_circuit(d: &Diagram, cfg: &CircuitAnsatzConfig) -> Result<Circuit, CircuitError> {
    let order = check(d)?;
    let ins = d.box_inputs();
    let outs = d.box_outputs();
    let mut wire_qubits: Vec<Vec<usize>> = vec![Vec::new(); d.wires.len()];
    let mut n_qubits = 0usize;
    let mut fresh = |count: usize| -> Vec<usize> {
        n_qubits += count;
        (n_qubits - count..n_qubits).collect()
    };
    let mut gates = Vec::new();
    let mut postselect = Vec::new();
    let mut table = SymbolTable::default();

    for node in order {
        match node {
            NodeRef::Box(bi) => {
                let b = &d.boxes[bi];
                let mut qubits: Vec<usize> = ins[bi]
                    .iter()
                    .flat_map(|w| wire_qubits[w.expect("validated")].clone())
                    .collect();
                let a = qubits.len();
                let widths: Vec<usize> = b.cod.simples().iter().map(|&t| cfg.qubits_for(t)).collect();
                let out_width: usize = widths.iter().sum();
                if out_width > a {
                    qubits.extend(fresh(out_width - a));
                }
                let block = word_block(qubits.len(), cfg);
                let fp = b.fingerprint();
                let local: Vec<usize> = (0..block.n_params)
                    .map(|j| table.intern(Symbol::new(&b.name, &fp, j)))
                    .collect();
                for g in block.gates {
                    gates.push(Gate {
                        kind: g.kind,
                        qubits: g.qubits.iter().map(|&q| qubits[q]).collect(),
                        param: g.param.map(|p| match p {
                            Angle::Symbol(j) => Angle::Symbol(local[j]),
                            c => c,
                        }),
                    });
                }
                if a > out_width {
                    postselect.extend_from_slice(&qubits[out_width..]);
                }
                let mut offset = 0;
                for (port, &wdt) in widths.iter().enumerate() {
                    let w = outs[bi][port].expect("validated");
                    wire_qubits[w] = qubits[offset..offset + wdt].to_vec();
                    offset += wdt;
                }
            }
            NodeRef::Cap(ci) => {
                let [l, r] = d.caps[ci];
                let q = cfg.qubits_for(d.wires[l].ty);
                let left = fresh(q);
                let right = fresh(q);
                for (&a, &b) in left.iter().zip(&right) {
                    gates.extend(cap_block(a, b));
                }
                wire_qubits[l] = left;
                wire_qubits[r] = right;
            }
            NodeRef::Cup(ci) => {
                let [l, r] = d.cups[ci];
                for (&a, &b) in wire_qubits[l].iter().zip(&wire_qubits[r]) {
                    let (g, post) = cup_block(a, b);
                    gates.extend(g);
                    postselect.extend_from_slice(&post);
                }
            }
        }
    }

    let output_qubits: Vec<usize> = d.open_wires.iter().flat_map(|&w| wire_qubits[w].clone()).collect();
    if n_qubits > cfg.max_qubits {
        return Err(CircuitError::WidthOverflow { needed: n_qubits, limit: cfg.max_qubits });
    }
    Ok(Circuit { n_qubits, gates, postselect, output_qubits, symbols: table.symbols })
}

/// Number of distinct symbols [`compile_circuit`] would produce, computed
/// from the diagram's boxes without emitting gates.
pub fn param_count(d: &Diagram, cfg: &CircuitAnsatzConfig) -> Result<usize, CircuitError> {
    check(d)?;
    let mut seen = std::collections::HashSet::new();
    let mut total = 0;
    let mut n_qubits = 0;
    for b in &d.boxes {
        let a: usize = b.dom.simples().iter().map(|&t| cfg.qubits_for(t)).sum();
        let c: usize = b.cod.simples().iter().map(|&t| cfg.qubits_for(t)).sum();
        n_qubits += c.saturating_sub(a);
        if seen.insert((b.name.clone(), b.fingerprint())) {
            total += cfg.block_params(a.max(c));
        }
    }
    for cap in &d.caps {
        n_qubits += 2 * cfg.qubits_for(d.wires[cap[0]].ty);
    }
    if total == 0 {
        return Err(CircuitError::ZeroParameterModel);
    }
    if n_qubits > cfg.max_qubits {
        return Err(CircuitError::WidthOverflow { needed: n_qubits, limit: cfg.max_qubits });
    }
    Ok(total)
}
