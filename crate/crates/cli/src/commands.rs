//! The single-artifact subcommands: parse, rewrite, compile and simulate.

use std::collections::HashMap;

use qnlp_core::circuit::{compile_circuit, Circuit, CircuitAnsatz, CircuitAnsatzConfig};
use qnlp_core::diagram::{Diagram, Source};
use qnlp_core::pregroup::{parse_text, Lexicon};
use qnlp_core::rewrite::{rewrite, RewriteScheme};
use qnlp_core::simulator::sentence_distribution;
use qnlp_core::tensornet::{compile_network, TensorAnsatz, TensorAnsatzConfig};
use serde::Deserialize;

use crate::CliError;

pub fn parse(sentence: &str, lexicon: &Lexicon, emit_json: bool) -> Result<String, CliError> {
    let d = parse_text(sentence, lexicon).map_err(|e| CliError::pipeline("parse", e))?;
    if emit_json {
        return Ok(d.to_json());
    }
    let mut offsets = Vec::with_capacity(d.boxes.len());
    let mut next = 0;
    for b in &d.boxes {
        offsets.push(next);
        next += b.cod.len();
    }
    let position = |w: usize| match d.wires[w].source {
        Source::Box { index, port } => offsets[index] + port,
        Source::Cap { .. } => usize::MAX,
    };
    let mut out = String::new();
    for b in &d.boxes {
        out.push_str(&format!("{}: {}\n", b.name, b.cod));
    }
    let cups: Vec<String> = d.cups.iter().map(|&[l, r]| format!("({},{})", position(l), position(r))).collect();
    out.push_str(&format!("cups: {}\n", cups.join(" ")));
    let open: Vec<String> = d.open_types().iter().map(ToString::to_string).collect();
    out.push_str(&format!("open: {}\n", open.join(" ")));
    Ok(out)
}

fn read_diagram(json: &str) -> Result<Diagram, CliError> {
    Diagram::from_json(json).map_err(|e| CliError::Config(format!("diagram: {e}")))
}

pub fn rewrite_json(diagram: &str, scheme: RewriteScheme) -> Result<String, CliError> {
    let d = rewrite(&read_diagram(diagram)?, scheme).map_err(|e| CliError::pipeline("rewrite", e))?;
    Ok(d.to_json())
}

/// Compiles to a circuit for circuit ansätze and to a tensor network for
/// `tensor`, `spider` and `mps`.
pub fn compile_json(diagram: &str, ansatz: &str, layers: usize, rotations: usize) -> Result<String, CliError> {
    let d = read_diagram(diagram)?;
    if let Ok(kind) = ansatz.parse::<CircuitAnsatz>() {
        let c = compile_circuit(&d, &CircuitAnsatzConfig::new(kind, layers, rotations))
            .map_err(|e| CliError::pipeline("compile", e))?;
        return Ok(c.to_json());
    }
    if let Ok(kind) = ansatz.parse::<TensorAnsatz>() {
        let n = compile_network(&d, &TensorAnsatzConfig::new(kind)).map_err(|e| CliError::pipeline("compile", e))?;
        return Ok(n.to_json());
    }
    Err(CliError::Config(format!("unknown ansatz `{ansatz}`")))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Params {
    List(Vec<f64>),
    /// Keyed by the symbol's display form `word__type__index`.
    Named(HashMap<String, f64>),
}

pub fn simulate_json(circuit: &str, params: &str) -> Result<String, CliError> {
    let c = Circuit::from_json(circuit).map_err(|e| CliError::Config(format!("circuit: {e}")))?;
    let params: Params = serde_json::from_str(params).map_err(|e| CliError::Config(format!("params: {e}")))?;
    let values = match params {
        Params::List(v) => v,
        Params::Named(map) => c
            .symbols
            .iter()
            .map(|s| map.get(&s.to_string()).copied().ok_or_else(|| CliError::Config(format!("params: missing `{s}`"))))
            .collect::<Result<_, _>>()?,
    };
    let dist = sentence_distribution(&c, &values).map_err(|e| CliError::pipeline("simulate", e))?;
    Ok(serde_json::json!({ "probs": dist.probs, "degenerate": dist.degenerate }).to_string())
}
