use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};

use crate::augcodec::{AugmentedExample, StructuredLabel};
use crate::error::{contract, Result};
use crate::rng::stream;

/// One N-way K-shot evaluation unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    /// Sampled relation types, in sampling order.
    pub types: Vec<String>,
    pub support: Vec<AugmentedExample>,
    pub query: Vec<AugmentedExample>,
}

fn relation_type(ex: &AugmentedExample) -> Option<&str> {
    ex.labels.iter().find_map(|l| match l {
        StructuredLabel::ReInstance(r) => Some(r.rtype.as_str()),
        StructuredLabel::Relation(r) => Some(r.rtype.as_str()),
        _ => None,
    })
}

/// Draws `n_way` relation types uniformly among those with at least
/// `k_shot + n_query` examples, then that many examples of each without
/// replacement; the first `k_shot` go to the support set.
pub fn sample_episode(
    pool: &[AugmentedExample],
    n_way: usize,
    k_shot: usize,
    n_query: usize,
    seed: u64,
) -> Result<Episode> {
    if n_way == 0 || k_shot == 0 || n_query == 0 {
        return contract("n_way, k_shot and n_query must be positive");
    }
    let mut by_type: BTreeMap<&str, Vec<&AugmentedExample>> = BTreeMap::new();
    for ex in pool {
        if let Some(t) = relation_type(ex) {
            by_type.entry(t).or_default().push(ex);
        }
    }
    let need = k_shot + n_query;
    let eligible: Vec<(&str, Vec<&AugmentedExample>)> =
        by_type.into_iter().filter(|(_, v)| v.len() >= need).collect();
    if eligible.len() < n_way {
        return contract(format!(
            "only {} relation types have {need} examples, {n_way} needed",
            eligible.len()
        ));
    }
    let mut rng = stream(seed, "episode");
    let mut picked: Vec<usize> = (0..eligible.len()).collect();
    picked.shuffle(&mut rng);
    picked.truncate(n_way);
    let mut episode = Episode {
        types: Vec::new(),
        support: Vec::new(),
        query: Vec::new(),
    };
    for i in picked {
        let (t, examples) = &eligible[i];
        let draw = index::sample(&mut rng, examples.len(), need);
        for (j, e) in draw.iter().enumerate() {
            let ex = examples[e].clone();
            if j < k_shot {
                episode.support.push(ex);
            } else {
                episode.query.push(ex);
            }
        }
        episode.types.push(t.to_string());
    }
    Ok(episode)
}
