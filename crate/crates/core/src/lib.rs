//! Compositional sentence classifiers: pregroup parsing into string diagrams,
//! diagram rewriting, compilation to parameterised circuits or tensor
//! networks, exact simulation and training.

pub mod circuit;
pub mod diagram;
pub mod pregroup;
pub mod rewrite;
pub mod simulator;
pub mod symbol;
pub mod tensor;
pub mod tensornet;
pub mod training;

pub use circuit::{compile_circuit, Circuit, CircuitAnsatz, CircuitAnsatzConfig};
pub use diagram::{Diagram, TensorAssignment, WireDims};
pub use pregroup::{parse_sentence, Lexicon, PregroupType, SimpleType};
pub use rewrite::{rewrite, RewriteScheme};
pub use symbol::Symbol;
pub use tensor::DenseTensor;
pub use tensornet::{compile_network, Network, TensorAnsatz, TensorAnsatzConfig};
pub use training::{fit, History, TrainConfig};
