//! Pregroup type algebra, lexicon and the sentence parser.
//!
//! A simple type is a base (`n` or `s`) with an integer adjoint order `z`:
//! `z = -1` is the left adjoint, `z = +1` the right adjoint. Two adjacent
//! simples `t · u` contract to the unit when they share a base and
//! `u.z = t.z + 1`, which covers both `p · pʳ → 1` and `pˡ · p → 1`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::Diagram;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("unknown word `{0}`")]
    UnknownWord(String),
    #[error("no planar reduction of `{0}` to the target type")]
    NoReduction(String),
    #[error("cannot reduce an empty sentence")]
    EmptySentence,
    #[error("bad type expression `{0}`")]
    BadType(String),
    #[error("lexicon line {line}: {reason}")]
    BadLexiconLine { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    N,
    S,
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Base::N => "n",
            Base::S => "s",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimpleType {
    pub base: Base,
    pub z: i32,
}

impl SimpleType {
    pub const N: SimpleType = SimpleType { base: Base::N, z: 0 };
    pub const S: SimpleType = SimpleType { base: Base::S, z: 0 };

    pub const fn new(base: Base, z: i32) -> Self {
        Self { base, z }
    }

    pub fn adjoint(self, side: Side) -> Self {
        match side {
            Side::Left => Self::new(self.base, self.z - 1),
            Side::Right => Self::new(self.base, self.z + 1),
        }
    }

    pub fn left(self) -> Self {
        self.adjoint(Side::Left)
    }

    pub fn right(self) -> Self {
        self.adjoint(Side::Right)
    }

    pub fn is_plain(self) -> bool {
        self.z == 0
    }

    /// `self · next → 1`.
    pub fn contracts_with(self, next: SimpleType) -> bool {
        self.base == next.base && next.z == self.z + 1
    }
}

impl fmt::Display for SimpleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.base)?;
        let suffix = if self.z < 0 { ".l" } else { ".r" };
        for _ in 0..self.z.unsigned_abs() {
            f.write_str(suffix)?;
        }
        Ok(())
    }
}

impl FromStr for SimpleType {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut parts = s.split('.');
        let base = match parts.next() {
            Some("n") => Base::N,
            Some("s") => Base::S,
            _ => return Err(ParseError::BadType(s.to_string())),
        };
        let mut z = 0;
        for p in parts {
            match p {
                "l" => z -= 1,
                "r" => z += 1,
                _ => return Err(ParseError::BadType(s.to_string())),
            }
        }
        Ok(Self { base, z })
    }
}

impl Serialize for SimpleType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SimpleType {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An ordered product of simple types. The empty product is the unit `1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PregroupType(Vec<SimpleType>);

impl PregroupType {
    pub fn unit() -> Self {
        Self(Vec::new())
    }

    pub fn new(simples: Vec<SimpleType>) -> Self {
        Self(simples)
    }

    pub fn simples(&self) -> &[SimpleType] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &PregroupType) -> PregroupType {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }
}

impl From<SimpleType> for PregroupType {
    fn from(t: SimpleType) -> Self {
        Self(vec![t])
    }
}

impl fmt::Display for PregroupType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("@")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for PregroupType {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "1" {
            return Ok(Self::unit());
        }
        s.split('@')
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl Serialize for PregroupType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PregroupType {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Word → candidate types. Lookups are lowercased; entry order is the
/// order in which the parser tries ambiguous readings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<PregroupType>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str, ty: PregroupType) {
        let list = self.entries.entry(word.to_lowercase()).or_default();
        if !list.contains(&ty) {
            list.push(ty);
        }
    }

    pub fn lookup(&self, word: &str) -> Option<&[PregroupType]> {
        self.entries
            .get(&word.to_lowercase())
            .map(Vec::as_slice)
            .filter(|v| !v.is_empty())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup(word).is_some()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses `word<TAB>type-expression` lines. Blank lines and `#` comments
    /// are skipped; a repeated word adds another reading.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut lex = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (word, expr) = line.split_once('\t').ok_or_else(|| ParseError::BadLexiconLine {
                line: i + 1,
                reason: "expected word<TAB>type".into(),
            })?;
            let ty: PregroupType = expr.parse().map_err(|e: ParseError| ParseError::BadLexiconLine {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if word.trim().is_empty() {
                return Err(ParseError::BadLexiconLine {
                    line: i + 1,
                    reason: "empty word".into(),
                });
            }
            lex.insert(word.trim(), ty);
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, ParseError> {
        let text = std::fs::read_to_string(path).map_err(|e| ParseError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (word, types) in &self.entries {
            for t in types {
                out.push_str(word);
                out.push('\t');
                out.push_str(&t.to_string());
                out.push('\n');
            }
        }
        out
    }
}

/// Cups are index pairs `(i, j)`, `i < j`, into the flattened simple-type
/// sequence; `residual` lists the surviving indices left to right.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionWitness {
    pub cups: Vec<(usize, usize)>,
    pub residual: Vec<usize>,
}

/// Finds a planar reduction of `ts` to `target` by stack scanning.
///
/// Each simple is either pushed or, when it contracts with the stack top,
/// cupped against it. Contraction is tried before pushing and the search
/// backtracks over both choices, so the first witness found prefers the
/// leftmost contractions.
pub fn reduce_types(
    ts: &[SimpleType],
    target: &PregroupType,
) -> Result<ReductionWitness, ParseError> {
    if ts.is_empty() {
        return Err(ParseError::EmptySentence);
    }
    let mut stack = Vec::with_capacity(ts.len());
    let mut cups = Vec::new();
    if scan(ts, target.simples(), 0, &mut stack, &mut cups) {
        cups.sort_unstable();
        Ok(ReductionWitness {
            cups,
            residual: stack,
        })
    } else {
        Err(ParseError::NoReduction(
            ts.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "),
        ))
    }
}

fn scan(
    ts: &[SimpleType],
    target: &[SimpleType],
    i: usize,
    stack: &mut Vec<usize>,
    cups: &mut Vec<(usize, usize)>,
) -> bool {
    if i == ts.len() {
        return stack.len() == target.len()
            && stack.iter().zip(target).all(|(&k, t)| ts[k] == *t);
    }
    // Each remaining simple can remove at most one stack entry.
    if stack.len() > target.len() + (ts.len() - i) {
        return false;
    }
    let u = ts[i];
    if let Some(&top) = stack.last() {
        if ts[top].contracts_with(u) {
            stack.pop();
            cups.push((top, i));
            if scan(ts, target, i + 1, stack, cups) {
                return true;
            }
            cups.pop();
            stack.push(top);
        }
    }
    stack.push(i);
    if scan(ts, target, i + 1, stack, cups) {
        return true;
    }
    stack.pop();
    false
}

/// Parses `words` into a diagram with one word box per word.
///
/// Ambiguous words are resolved by trying readings in lexicon order, with
/// the last word varying fastest; the first reading that reduces wins.
pub fn parse_sentence<S: AsRef<str>>(
    words: &[S],
    lexicon: &Lexicon,
    target: &PregroupType,
) -> Result<Diagram, ParseError> {
    if words.is_empty() {
        return Err(ParseError::EmptySentence);
    }
    let mut options = Vec::with_capacity(words.len());
    for w in words {
        let w = w.as_ref();
        options.push(lexicon.lookup(w).ok_or_else(|| ParseError::UnknownWord(w.to_string()))?);
    }
    let mut choice = vec![0usize; words.len()];
    loop {
        let types: Vec<PregroupType> = choice
            .iter()
            .zip(&options)
            .map(|(&c, opts)| opts[c].clone())
            .collect();
        let flat: Vec<SimpleType> = types.iter().flat_map(|t| t.simples().iter().copied()).collect();
        if let Ok(witness) = reduce_types(&flat, target) {
            let names: Vec<String> = words.iter().map(|w| w.as_ref().to_lowercase()).collect();
            return Ok(Diagram::from_reduction(&names, &types, &witness));
        }
        // Odometer over readings.
        let mut k = words.len();
        loop {
            if k == 0 {
                let sentence = words.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
                return Err(ParseError::NoReduction(sentence));
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < options[k].len() {
                break;
            }
            choice[k] = 0;
        }
    }
}

/// Splits on whitespace and parses against the sentence type `s`.
pub fn parse_text(text: &str, lexicon: &Lexicon) -> Result<Diagram, ParseError> {
    let words: Vec<&str> = text.split_whitespace().collect();
    parse_sentence(&words, lexicon, &PregroupType::from(SimpleType::S))
}
