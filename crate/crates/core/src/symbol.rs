use std::fmt;

use serde::{Deserialize, Serialize};

/// A trainable parameter slot, keyed by the word, the box type it was
/// compiled from and its position inside the box's block. Equal symbols in
/// different sentences share one value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol {
    pub word: String,
    pub type_fingerprint: String,
    pub index: usize,
}

impl Symbol {
    pub fn new(word: &str, type_fingerprint: &str, index: usize) -> Self {
        Self {
            word: word.to_string(),
            type_fingerprint: type_fingerprint.to_string(),
            index,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}__{}__{}", self.word, self.type_fingerprint, self.index)
    }
}
