//! String-diagram IR shared by the parser, the rewriters and both backends.
//!
//! A diagram is a set of boxes, cups and caps connected by typed wires. Every
//! wire has exactly one producer (a box output port or one leg of a cap) and
//! exactly one consumer (a box input port, one leg of a cup, or an open output
//! position). The order of `wires` is the left-to-right order used for the
//! planarity check.
//!
//! [`eval_tensor`] is the reference semantics: a brute-force sum over every
//! assignment of wire indices. It is slow on purpose and serves as the oracle
//! for the rewriters and the tensor-network backend.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pregroup::{Base, PregroupType, ReductionWitness, SimpleType};
use crate::tensor::{increment, DenseTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Left,
    Right,
}

impl End {
    pub fn index(self) -> usize {
        match self {
            End::Left => 0,
            End::Right => 1,
        }
    }

    pub fn other(self) -> End {
        match self {
            End::Left => End::Right,
            End::Right => End::Left,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoxTag {
    Word,
    /// A word box whose adjoint output ports `bent_ports` (indices into
    /// `origin_cod`) were turned into inputs, in that order.
    Curried {
        origin_cod: PregroupType,
        bent_ports: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordBox {
    pub name: String,
    pub dom: PregroupType,
    pub cod: PregroupType,
    pub tag: BoxTag,
}

impl WordBox {
    pub fn word(name: &str, cod: PregroupType) -> Self {
        Self {
            name: name.to_string(),
            dom: PregroupType::unit(),
            cod,
            tag: BoxTag::Word,
        }
    }

    /// Identifies the box's parameters across sentences: boxes with equal
    /// name and fingerprint share weights.
    pub fn fingerprint(&self) -> String {
        match self.tag {
            BoxTag::Word => self.cod.to_string(),
            BoxTag::Curried { .. } => format!("{}->{}", self.dom, self.cod),
        }
    }

    pub fn legs(&self) -> impl Iterator<Item = SimpleType> + '_ {
        self.dom.simples().iter().chain(self.cod.simples()).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Source {
    Box { index: usize, port: usize },
    Cap { index: usize, end: End },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Target {
    Box { index: usize, port: usize },
    Cup { index: usize, end: End },
    Open { position: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Wire {
    #[serde(rename = "type")]
    pub ty: SimpleType,
    pub source: Source,
    pub target: Target,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagram {
    pub boxes: Vec<WordBox>,
    pub wires: Vec<Wire>,
    /// `[left wire, right wire]` per cup.
    pub cups: Vec<[usize; 2]>,
    /// `[left wire, right wire]` per cap.
    #[serde(default)]
    pub caps: Vec<[usize; 2]>,
    pub open_wires: Vec<usize>,
}

/// A node of the diagram graph, used for scheduling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeRef {
    Box(usize),
    Cap(usize),
    Cup(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    DanglingReference { wire: usize },
    TypeMismatch { wire: usize },
    PortNotConnected { node: String, port: usize, count: usize },
    NonContractibleCup { cup: usize },
    NonContractibleCap { cap: usize },
    PlanarityViolation { first: usize, second: usize },
    WordBoxWithDomain { index: usize },
    InconsistentCurry { index: usize },
    Cycle,
}

#[derive(Debug, Error, PartialEq)]
pub enum DiagramError {
    #[error("invalid diagram: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("tensor for box {index} has shape {actual:?}, expected {expected:?}")]
    ShapeMismatch {
        index: usize,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("assignment has {actual} tensors for {expected} boxes")]
    MissingTensor { expected: usize, actual: usize },
    #[error("json: {0}")]
    Json(String),
}

impl Diagram {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds the parse diagram: one word box per word, one wire per
    /// flattened simple type (so wire `i` is simple `i`), cups from the
    /// witness and the residual wires open.
    pub fn from_reduction(
        words: &[String],
        types: &[PregroupType],
        witness: &ReductionWitness,
    ) -> Self {
        let mut boxes = Vec::with_capacity(words.len());
        let mut wires = Vec::new();
        for (bi, (w, t)) in words.iter().zip(types).enumerate() {
            boxes.push(WordBox::word(w, t.clone()));
            for (port, &ty) in t.simples().iter().enumerate() {
                wires.push(Wire {
                    ty,
                    source: Source::Box { index: bi, port },
                    target: Target::Open { position: usize::MAX },
                });
            }
        }
        let mut cups = Vec::with_capacity(witness.cups.len());
        for (ci, &(l, r)) in witness.cups.iter().enumerate() {
            wires[l].target = Target::Cup { index: ci, end: End::Left };
            wires[r].target = Target::Cup { index: ci, end: End::Right };
            cups.push([l, r]);
        }
        for (pos, &w) in witness.residual.iter().enumerate() {
            wires[w].target = Target::Open { position: pos };
        }
        Self {
            boxes,
            wires,
            cups,
            caps: Vec::new(),
            open_wires: witness.residual.clone(),
        }
    }

    /// Wire index feeding each input port, per box.
    pub fn box_inputs(&self) -> Vec<Vec<Option<usize>>> {
        let mut out: Vec<Vec<Option<usize>>> =
            self.boxes.iter().map(|b| vec![None; b.dom.len()]).collect();
        for (w, wire) in self.wires.iter().enumerate() {
            if let Target::Box { index, port } = wire.target {
                if let Some(slot) = out.get_mut(index).and_then(|v| v.get_mut(port)) {
                    *slot = Some(w);
                }
            }
        }
        out
    }

    /// Wire index leaving each output port, per box.
    pub fn box_outputs(&self) -> Vec<Vec<Option<usize>>> {
        let mut out: Vec<Vec<Option<usize>>> =
            self.boxes.iter().map(|b| vec![None; b.cod.len()]).collect();
        for (w, wire) in self.wires.iter().enumerate() {
            if let Source::Box { index, port } = wire.source {
                if let Some(slot) = out.get_mut(index).and_then(|v| v.get_mut(port)) {
                    *slot = Some(w);
                }
            }
        }
        out
    }

    pub fn open_types(&self) -> Vec<SimpleType> {
        self.open_wires.iter().map(|&w| self.wires[w].ty).collect()
    }

    fn source_node(&self, w: usize) -> NodeRef {
        match self.wires[w].source {
            Source::Box { index, .. } => NodeRef::Box(index),
            Source::Cap { index, .. } => NodeRef::Cap(index),
        }
    }

    fn target_node(&self, w: usize) -> Option<NodeRef> {
        match self.wires[w].target {
            Target::Box { index, .. } => Some(NodeRef::Box(index)),
            Target::Cup { index, .. } => Some(NodeRef::Cup(index)),
            Target::Open { .. } => None,
        }
    }

    /// Topological order of boxes, caps and cups. Among ready nodes, boxes
    /// come first (lowest index), then caps, then cups. Returns `None` on a
    /// cycle. Assumes references are in range; see [`validate`].
    pub fn schedule(&self) -> Option<Vec<NodeRef>> {
        let nodes: Vec<NodeRef> = (0..self.boxes.len())
            .map(NodeRef::Box)
            .chain((0..self.caps.len()).map(NodeRef::Cap))
            .chain((0..self.cups.len()).map(NodeRef::Cup))
            .collect();
        let slot = |n: NodeRef| match n {
            NodeRef::Box(i) => i,
            NodeRef::Cap(i) => self.boxes.len() + i,
            NodeRef::Cup(i) => self.boxes.len() + self.caps.len() + i,
        };
        let mut indegree = vec![0usize; nodes.len()];
        let mut succ: Vec<Vec<NodeRef>> = vec![Vec::new(); nodes.len()];
        for w in 0..self.wires.len() {
            if let Some(t) = self.target_node(w) {
                let s = self.source_node(w);
                indegree[slot(t)] += 1;
                succ[slot(s)].push(t);
            }
        }
        let mut ready: BinaryHeap<Reverse<NodeRef>> = nodes
            .iter()
            .filter(|&&n| indegree[slot(n)] == 0)
            .map(|&n| Reverse(n))
            .collect();
        let mut order = Vec::with_capacity(nodes.len());
        while let Some(Reverse(n)) = ready.pop() {
            order.push(n);
            for &t in &succ[slot(n)] {
                indegree[slot(t)] -= 1;
                if indegree[slot(t)] == 0 {
                    ready.push(Reverse(t));
                }
            }
        }
        (order.len() == nodes.len()).then_some(order)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagram serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, DiagramError> {
        serde_json::from_str(text).map_err(|e| DiagramError::Json(e.to_string()))
    }
}

fn crosses(a: [usize; 2], b: [usize; 2]) -> bool {
    let (a0, a1) = (a[0].min(a[1]), a[0].max(a[1]));
    let (b0, b1) = (b[0].min(b[1]), b[0].max(b[1]));
    (a0 < b0 && b0 < a1 && a1 < b1) || (b0 < a0 && a0 < b1 && b1 < a1)
}

/// Checks every structural invariant; an empty list means the diagram is valid.
pub fn validate(d: &Diagram) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut box_in: Vec<Vec<usize>> = d.boxes.iter().map(|b| vec![0; b.dom.len()]).collect();
    let mut box_out: Vec<Vec<usize>> = d.boxes.iter().map(|b| vec![0; b.cod.len()]).collect();
    let mut refs_ok = true;

    for (w, wire) in d.wires.iter().enumerate() {
        let mut dangling = false;
        let mut mismatch = false;
        match wire.source {
            Source::Box { index, port } => match d.boxes.get(index).and_then(|b| b.cod.simples().get(port)) {
                Some(&t) => {
                    box_out[index][port] += 1;
                    mismatch |= t != wire.ty;
                }
                None => dangling = true,
            },
            Source::Cap { index, end } => {
                dangling |= d.caps.get(index).map(|c| c[end.index()]) != Some(w);
            }
        }
        match wire.target {
            Target::Box { index, port } => match d.boxes.get(index).and_then(|b| b.dom.simples().get(port)) {
                Some(&t) => {
                    box_in[index][port] += 1;
                    mismatch |= t != wire.ty;
                }
                None => dangling = true,
            },
            Target::Cup { index, end } => {
                dangling |= d.cups.get(index).map(|c| c[end.index()]) != Some(w);
            }
            Target::Open { position } => {
                dangling |= d.open_wires.get(position) != Some(&w);
            }
        }
        if dangling {
            refs_ok = false;
            out.push(Violation::DanglingReference { wire: w });
        }
        if mismatch {
            out.push(Violation::TypeMismatch { wire: w });
        }
    }

    for (bi, counts) in box_in.iter().enumerate() {
        for (port, &count) in counts.iter().enumerate() {
            if count != 1 {
                out.push(Violation::PortNotConnected { node: format!("box {bi} input"), port, count });
            }
        }
    }
    for (bi, counts) in box_out.iter().enumerate() {
        for (port, &count) in counts.iter().enumerate() {
            if count != 1 {
                out.push(Violation::PortNotConnected { node: format!("box {bi} output"), port, count });
            }
        }
    }

    let wire_ty = |w: usize| d.wires.get(w).map(|x| x.ty);
    for (ci, cup) in d.cups.iter().enumerate() {
        for end in [End::Left, End::Right] {
            let w = cup[end.index()];
            if d.wires.get(w).map(|x| x.target) != Some(Target::Cup { index: ci, end }) {
                refs_ok = false;
                out.push(Violation::PortNotConnected { node: format!("cup {ci}"), port: end.index(), count: 0 });
            }
        }
        match (wire_ty(cup[0]), wire_ty(cup[1])) {
            (Some(l), Some(r)) if l.contracts_with(r) => {}
            _ => out.push(Violation::NonContractibleCup { cup: ci }),
        }
    }
    for (ci, cap) in d.caps.iter().enumerate() {
        for end in [End::Left, End::Right] {
            let w = cap[end.index()];
            if d.wires.get(w).map(|x| x.source) != Some(Source::Cap { index: ci, end }) {
                refs_ok = false;
                out.push(Violation::PortNotConnected { node: format!("cap {ci}"), port: end.index(), count: 0 });
            }
        }
        // A cap produces pʳ·p or p·pˡ: the right leg contracts with the left.
        match (wire_ty(cap[0]), wire_ty(cap[1])) {
            (Some(l), Some(r)) if r.contracts_with(l) => {}
            _ => out.push(Violation::NonContractibleCap { cap: ci }),
        }
    }
    for (pos, &w) in d.open_wires.iter().enumerate() {
        if d.wires.get(w).map(|x| x.target) != Some(Target::Open { position: pos }) {
            refs_ok = false;
            out.push(Violation::PortNotConnected { node: "open".into(), port: pos, count: 0 });
        }
    }

    for i in 0..d.cups.len() {
        for j in i + 1..d.cups.len() {
            if crosses(d.cups[i], d.cups[j]) {
                out.push(Violation::PlanarityViolation { first: i, second: j });
            }
        }
    }
    for i in 0..d.caps.len() {
        for j in i + 1..d.caps.len() {
            if crosses(d.caps[i], d.caps[j]) {
                out.push(Violation::PlanarityViolation { first: i, second: j });
            }
        }
    }

    for (bi, b) in d.boxes.iter().enumerate() {
        match &b.tag {
            BoxTag::Word if !b.dom.is_empty() => out.push(Violation::WordBoxWithDomain { index: bi }),
            BoxTag::Curried { origin_cod, bent_ports } => {
                let ok = bent_ports.len() == b.dom.len()
                    && origin_cod.len() == b.dom.len() + b.cod.len()
                    && bent_ports.iter().all(|&p| p < origin_cod.len());
                if !ok {
                    out.push(Violation::InconsistentCurry { index: bi });
                }
            }
            BoxTag::Word => {}
        }
    }

    if refs_ok && d.schedule().is_none() {
        out.push(Violation::Cycle);
    }
    out
}

/// Per-base wire dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireDims {
    pub n: usize,
    pub s: usize,
}

impl Default for WireDims {
    fn default() -> Self {
        Self { n: 2, s: 2 }
    }
}

impl WireDims {
    pub fn of(&self, t: SimpleType) -> usize {
        match t.base {
            Base::N => self.n,
            Base::S => self.s,
        }
    }

    /// Tensor shape of a box: dom dims followed by cod dims.
    pub fn box_shape(&self, b: &WordBox) -> Vec<usize> {
        b.legs().map(|t| self.of(t)).collect()
    }
}

/// One dense tensor per box, aligned with `Diagram::boxes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorAssignment {
    pub dims: WireDims,
    pub tensors: Vec<DenseTensor>,
}

impl TensorAssignment {
    pub fn random<R: Rng + ?Sized>(d: &Diagram, dims: WireDims, rng: &mut R) -> Self {
        let tensors = d
            .boxes
            .iter()
            .map(|b| DenseTensor::random_normal(&dims.box_shape(b), 1.0, rng))
            .collect();
        Self { dims, tensors }
    }
}

/// Contracts the diagram under `a`, returning a tensor over the open wires.
///
/// Every box contributes its tensor indexed by (input wires, output wires);
/// cups and caps contribute `δ`. The sum runs over all joint wire index
/// assignments.
pub fn eval_tensor(d: &Diagram, a: &TensorAssignment) -> Result<DenseTensor, DiagramError> {
    let violations = validate(d);
    if !violations.is_empty() {
        return Err(DiagramError::Invalid(violations));
    }
    if a.tensors.len() != d.boxes.len() {
        return Err(DiagramError::MissingTensor { expected: d.boxes.len(), actual: a.tensors.len() });
    }
    for (i, (b, t)) in d.boxes.iter().zip(&a.tensors).enumerate() {
        let expected = a.dims.box_shape(b);
        if t.shape() != expected.as_slice() {
            return Err(DiagramError::ShapeMismatch { index: i, expected, actual: t.shape().to_vec() });
        }
    }

    let ins = d.box_inputs();
    let outs = d.box_outputs();
    let legs: Vec<Vec<usize>> = ins
        .iter()
        .zip(&outs)
        .map(|(i, o)| i.iter().chain(o).map(|w| w.expect("validated")).collect())
        .collect();
    let dims: Vec<usize> = d.wires.iter().map(|w| a.dims.of(w.ty)).collect();
    let out_shape: Vec<usize> = d.open_wires.iter().map(|&w| dims[w]).collect();
    let mut result = DenseTensor::zeros(&out_shape);
    let total: usize = dims.iter().product();

    let mut idx = vec![0usize; d.wires.len()];
    let mut box_idx = Vec::new();
    let mut out_idx = vec![0usize; d.open_wires.len()];
    for _ in 0..total {
        let deltas_hold = d.cups.iter().chain(&d.caps).all(|p| idx[p[0]] == idx[p[1]]);
        if deltas_hold {
            let mut value = 1.0;
            for (t, leg_wires) in a.tensors.iter().zip(&legs) {
                box_idx.clear();
                box_idx.extend(leg_wires.iter().map(|&w| idx[w]));
                value *= t.get(&box_idx);
                if value == 0.0 {
                    break;
                }
            }
            for (k, &w) in d.open_wires.iter().enumerate() {
                out_idx[k] = idx[w];
            }
            let o = result.offset(&out_idx);
            result.data_mut()[o] += value;
        }
        increment(&mut idx, &dims);
    }
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramStats {
    pub n_boxes: usize,
    pub n_cups: usize,
    /// Largest number of simultaneously live wires when the diagram is
    /// swept in [`Diagram::schedule`] order.
    pub max_width: usize,
    pub open_types: Vec<SimpleType>,
}

pub fn count_stats(d: &Diagram) -> DiagramStats {
    let mut live: usize = 0;
    let mut max_width = 0;
    if let Some(order) = d.schedule() {
        for node in order {
            let (consumed, produced) = match node {
                NodeRef::Box(i) => (d.boxes[i].dom.len(), d.boxes[i].cod.len()),
                NodeRef::Cap(_) => (0, 2),
                NodeRef::Cup(_) => (2, 0),
            };
            live = live.saturating_sub(consumed) + produced;
            max_width = max_width.max(live);
        }
    }
    DiagramStats {
        n_boxes: d.boxes.len(),
        n_cups: d.cups.len(),
        max_width,
        open_types: d.open_types(),
    }
}
