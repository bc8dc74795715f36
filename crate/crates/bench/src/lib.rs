//! Fixtures shared by the engine benchmarks.

use qnlp_core::circuit::{compile_circuit, Circuit, CircuitAnsatz, CircuitAnsatzConfig};
use qnlp_core::diagram::Diagram;
use qnlp_core::pregroup::{parse_sentence, PregroupType};
use qnlp_core::rewrite::{rewrite, RewriteScheme};
use qnlp_core::tensornet::{compile_network, Network, TensorAnsatz, TensorAnsatzConfig, TensorParamStore};
use qnlp_core::training::{generate_mc, mc_lexicon, Item};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every sentence of the built-in corpus.
pub fn corpus() -> Vec<Item> {
    generate_mc(0, (192, 0, 0)).expect("built-in corpus").train.items
}

pub fn diagrams(scheme: RewriteScheme) -> Vec<Diagram> {
    let lex = mc_lexicon();
    let s: PregroupType = "s".parse().expect("sentence type");
    corpus()
        .iter()
        .map(|i| rewrite(&parse_sentence(&i.words, &lex, &s).expect("corpus parses"), scheme).expect("corpus rewrites"))
        .collect()
}

/// The widest compiled circuit of the corpus, with fixed angles.
pub fn widest_circuit(scheme: RewriteScheme, kind: CircuitAnsatz) -> (Circuit, Vec<f64>) {
    let cfg = CircuitAnsatzConfig::new(kind, 2, 3);
    let c = diagrams(scheme)
        .iter()
        .map(|d| compile_circuit(d, &cfg).expect("corpus compiles"))
        .max_by_key(|c| (c.n_qubits, c.gates.len()))
        .expect("non-empty corpus");
    let params = (0..c.symbols.len()).map(|i| 0.1 + 0.37 * i as f64).collect();
    (c, params)
}

/// The largest compiled network of the corpus with a random parameter store.
pub fn largest_network(scheme: RewriteScheme, kind: TensorAnsatz) -> (Network, TensorParamStore) {
    let cfg = TensorAnsatzConfig::new(kind);
    let net = diagrams(scheme)
        .iter()
        .map(|d| compile_network(d, &cfg).expect("corpus compiles"))
        .max_by_key(|n| n.nodes.len())
        .expect("non-empty corpus");
    let store = TensorParamStore::init(&net.param_shapes(), &mut ChaCha8Rng::seed_from_u64(0));
    (net, store)
}
