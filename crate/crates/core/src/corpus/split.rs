use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augcodec::{AugmentedExample, StructuredLabel, NOT_GIVEN};
use crate::error::{contract, Result};
use crate::rng::stream;

/// Fixed train/dev/test partition of a whole corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullSplit {
    pub train: Vec<AugmentedExample>,
    pub dev: Vec<AugmentedExample>,
    pub test: Vec<AugmentedExample>,
}

/// A low-resource training sample plus the shared dev/test sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<AugmentedExample>,
    pub dev: Vec<AugmentedExample>,
    pub test: Vec<AugmentedExample>,
    pub fraction: f64,
    pub seed: u64,
}

/// Shuffles once and carves off 10% dev and 20% test.
pub fn partition(examples: &[AugmentedExample], seed: u64) -> FullSplit {
    let n = examples.len();
    let dev = n / 10;
    let test = n / 5;
    partition_sizes(examples, dev, test, seed).expect("fractions fit")
}

/// Shuffles once and carves off `dev` and `test` examples; the rest is
/// the full training pool.
pub fn partition_sizes(examples: &[AugmentedExample], dev: usize, test: usize, seed: u64) -> Result<FullSplit> {
    if dev + test >= examples.len() {
        return contract(format!(
            "cannot hold out {dev} + {test} of {} examples",
            examples.len()
        ));
    }
    let mut all = examples.to_vec();
    all.shuffle(&mut stream(seed, "partition"));
    let train = all.split_off(dev + test);
    let test_set = all.split_off(dev);
    Ok(FullSplit {
        train,
        dev: all,
        test: test_set,
    })
}

/// Label kinds an example exhibits, used for coverage.
pub fn label_types(ex: &AugmentedExample) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for l in &ex.labels {
        match l {
            StructuredLabel::Entity(e) => {
                out.insert(format!("entity:{}", e.etype));
            }
            StructuredLabel::Relation(r) => {
                out.insert(format!("relation:{}", r.rtype));
            }
            StructuredLabel::SrlArg(a) => {
                out.insert(format!("role:{}", a.role));
            }
            StructuredLabel::ReInstance(r) => {
                out.insert(format!("relation:{}", r.rtype));
            }
            StructuredLabel::Belief(b) => {
                out.extend(
                    b.assignments
                        .iter()
                        .filter(|(_, v)| v.as_str() != NOT_GIVEN)
                        .map(|(k, _)| format!("slot:{k}")),
                );
            }
        }
    }
    out
}

/// Number of training examples kept for `fraction` of `n`: rounded, at
/// least one.
pub fn sample_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n.max(1))
}

/// Uniform sample of `full.train`, then a coverage pass that swaps in
/// examples for label types the sample misses when that costs no other
/// type. Dev and test are passed through unchanged.
pub fn subsample(full: &FullSplit, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return contract(format!("fraction must lie in (0, 1], got {fraction}"));
    }
    if full.train.is_empty() {
        return contract("empty training pool");
    }
    let mut pool: Vec<&AugmentedExample> = full.train.iter().collect();
    pool.shuffle(&mut stream(seed, "subsample"));
    let size = sample_size(pool.len(), fraction);
    let rest = pool.split_off(size);
    let mut chosen = pool;
    let mut types: Vec<BTreeSet<String>> = chosen.iter().map(|e| label_types(e)).collect();
    let wanted: BTreeSet<String> = full.train.iter().flat_map(label_types).collect();
    let mut used_rest = vec![false; rest.len()];
    for t in &wanted {
        if types.iter().any(|s| s.contains(t)) {
            continue;
        }
        let Some(r) = (0..rest.len()).find(|&r| !used_rest[r] && label_types(rest[r]).contains(t)) else {
            continue;
        };
        // Replace the last example whose types are all covered elsewhere.
        let victim = (0..chosen.len()).rev().find(|&c| {
            types[c]
                .iter()
                .all(|x| types.iter().enumerate().any(|(o, s)| o != c && s.contains(x)))
        });
        if let Some(c) = victim {
            chosen[c] = rest[r];
            types[c] = label_types(rest[r]);
            used_rest[r] = true;
        }
    }
    Ok(Split {
        train: chosen.into_iter().cloned().collect(),
        dev: full.dev.clone(),
        test: full.test.clone(),
        fraction,
        seed,
    })
}
