//! The built-in synthetic NER corpus used for desk-scale training runs.

use crate::augcodec::Task;
use crate::error::Result;

use super::generate::{generate, EntityTypeSpec, GenSpec, Template};
use super::split::{partition, subsample, Split};

const ONSETS: [&str; 10] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "t"];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];
const TYPES: [(&str, &str); 4] = [
    ("person", "rin"),
    ("location", "vale"),
    ("organization", "corp"),
    ("product", "x"),
];

const TEMPLATES: [&str; 12] = [
    "{person} visited {location} last week .",
    "{person} works for {organization} .",
    "{organization} released {product} in {location} .",
    "yesterday {person} bought a {product} .",
    "the new {product} was made by {organization} .",
    "{person} and {person} met in {location} .",
    "shares of {organization} rose after the {product} launch .",
    "the mayor of {location} is {person} .",
    "analysts expect {organization} to buy {organization} .",
    "according to {person} , the {product} sells well .",
    "tourists love {location} in summer .",
    "{person} flew from {location} to {location} .",
];

/// Sixty single-token entries per type.
fn lexicon(suffix: &str) -> Vec<String> {
    (0..60)
        .map(|j| format!("{}{}{suffix}", ONSETS[j % 10], VOWELS[j / 10]))
        .collect()
}

/// Four entity types, twelve templates, 1000 sentences.
pub fn reference_ner_spec(seed: u64) -> GenSpec {
    GenSpec {
        task: Task::Ner,
        n_sentences: 1000,
        seed,
        entity_types: TYPES
            .iter()
            .map(|(name, suffix)| EntityTypeSpec {
                name: name.to_string(),
                lexicon: lexicon(suffix),
            })
            .collect(),
        relation_types: Vec::new(),
        templates: TEMPLATES.iter().map(|t| Template::Plain(t.to_string())).collect(),
        slots: Vec::new(),
        system_utterances: Vec::new(),
        max_turns: 0,
    }
}

/// The reference corpus split into 100 dev and 200 test sentences with a
/// 64-sentence training sample.
pub fn reference_ner_split(seed: u64) -> Result<Split> {
    let full = partition(&generate(&reference_ner_spec(seed))?, seed);
    let fraction = 64.0 / full.train.len() as f64;
    subsample(&full, fraction, seed)
}
