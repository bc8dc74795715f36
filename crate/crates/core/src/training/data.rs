//! Labelled sentence sets: TSV I/O and a generator for a small two-topic
//! corpus (IT = 0, food = 1).

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pregroup::Lexicon;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {0}: expected `label<TAB>sentence` with a 0/1 label")]
    MalformedLine(usize),
    #[error("no split closes over the training vocabulary after {0} attempts")]
    VocabularyLeak(usize),
    #[error("requested {requested} sentences of one topic, only {available} exist")]
    NotEnoughSentences { requested: usize, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub words: Vec<String>,
    pub label: u8,
}

impl Item {
    pub fn sentence(&self) -> String {
        self.words.join(" ")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub name: String,
    pub items: Vec<Item>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn vocabulary(&self) -> BTreeSet<&str> {
        self.items.iter().flat_map(|i| i.words.iter().map(String::as_str)).collect()
    }

    pub fn to_tsv(&self) -> String {
        self.items.iter().map(|i| format!("{}\t{}\n", i.label, i.sentence())).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: LabeledSet,
    pub dev: LabeledSet,
    pub test: LabeledSet,
}

pub fn parse_tsv(text: &str, name: &str) -> Result<LabeledSet, DataError> {
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, sentence) = line.split_once('\t').ok_or(DataError::MalformedLine(i + 1))?;
        let label = match label.trim() {
            "0" => 0,
            "1" => 1,
            _ => return Err(DataError::MalformedLine(i + 1)),
        };
        let words: Vec<String> = sentence.split_whitespace().map(str::to_string).collect();
        if words.is_empty() {
            return Err(DataError::MalformedLine(i + 1));
        }
        items.push(Item { words, label });
    }
    Ok(LabeledSet { name: name.to_string(), items })
}

pub fn load_tsv(path: &Path, name: &str) -> Result<LabeledSet, DataError> {
    parse_tsv(&std::fs::read_to_string(path)?, name)
}

const SUBJECTS: [&str; 3] = ["man", "woman", "person"];
const VERB_SHARED: &str = "prepares";
const SUBJECT_ADJ: &str = "skillful";

struct Topic {
    label: u8,
    agent: &'static str,
    verbs: [&'static str; 2],
    objects: [&'static str; 2],
    object_adj: &'static str,
}

const TOPICS: [Topic; 2] = [
    Topic { label: 0, agent: "programmer", verbs: ["debugs", "runs"], objects: ["software", "application"], object_adj: "useful" },
    Topic { label: 1, agent: "chef", verbs: ["cooks", "bakes"], objects: ["meal", "sauce"], object_adj: "tasty" },
];

/// Lexicon covering every generated sentence.
pub fn mc_lexicon() -> Lexicon {
    let mut text = String::new();
    let mut add = |w: &str, t: &str| text.push_str(&format!("{w}\t{t}\n"));
    for w in SUBJECTS {
        add(w, "n");
    }
    add(VERB_SHARED, "n.r@s@n.l");
    add(SUBJECT_ADJ, "n@n.l");
    for t in &TOPICS {
        add(t.agent, "n");
        for v in t.verbs {
            add(v, "n.r@s@n.l");
        }
        for o in t.objects {
            add(o, "n");
        }
        add(t.object_adj, "n@n.l");
    }
    Lexicon::parse(&text).expect("built-in lexicon is well formed")
}

/// All sentences of one topic over the four patterns N V N, ADJ N V N,
/// N V ADJ N and ADJ N V ADJ N.
fn topic_sentences(t: &Topic) -> Vec<Item> {
    let subjects: Vec<&str> = SUBJECTS.iter().copied().chain([t.agent]).collect();
    let verbs: Vec<&str> = t.verbs.iter().copied().chain([VERB_SHARED]).collect();
    let mut out = Vec::new();
    for subj_adj in [false, true] {
        for obj_adj in [false, true] {
            for &s in &subjects {
                for &v in &verbs {
                    for &o in &t.objects {
                        let mut words = Vec::new();
                        if subj_adj {
                            words.push(SUBJECT_ADJ);
                        }
                        words.extend([s, v]);
                        if obj_adj {
                            words.push(t.object_adj);
                        }
                        words.push(o);
                        out.push(Item { words: words.into_iter().map(str::to_string).collect(), label: t.label });
                    }
                }
            }
        }
    }
    out
}

pub const MAX_SPLIT_ATTEMPTS: usize = 100;

/// Deterministic label-balanced train/dev/test split of the generated
/// corpus. Odd split sizes give the extra sentence to label 0.
pub fn generate_mc(seed: u64, sizes: (usize, usize, usize)) -> Result<Dataset, DataError> {
    let pools: Vec<Vec<Item>> = TOPICS.iter().map(topic_sentences).collect();
    let sizes = [sizes.0, sizes.1, sizes.2];
    let per_label = |n: usize, label: u8| if label == 0 { n.div_ceil(2) } else { n / 2 };
    for (label, pool) in pools.iter().enumerate() {
        let needed: usize = sizes.iter().map(|&n| per_label(n, label as u8)).sum();
        if needed > pool.len() {
            return Err(DataError::NotEnoughSentences { requested: needed, available: pool.len() });
        }
    }
    for attempt in 0..MAX_SPLIT_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64 * 0x9e37_79b9));
        let mut splits: [Vec<Item>; 3] = Default::default();
        for (label, pool) in pools.iter().enumerate() {
            let mut pool = pool.clone();
            pool.shuffle(&mut rng);
            let mut it = pool.into_iter();
            for (split, &n) in splits.iter_mut().zip(&sizes) {
                split.extend(it.by_ref().take(per_label(n, label as u8)));
            }
        }
        for split in &mut splits {
            split.shuffle(&mut rng);
        }
        let [train, dev, test] = splits.map(|items| items);
        let named = |name: &str, items: Vec<Item>| LabeledSet { name: name.to_string(), items };
        let data = Dataset { train: named("train", train), dev: named("dev", dev), test: named("test", test) };
        let vocab = data.train.vocabulary();
        let closed = data.dev.vocabulary().is_subset(&vocab) && data.test.vocabulary().is_subset(&vocab);
        if closed {
            return Ok(data);
        }
    }
    Err(DataError::VocabularyLeak(MAX_SPLIT_ATTEMPTS))
}
