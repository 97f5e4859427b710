use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::autodiff::ParamStore;
use crate::error::{contract, Result};
use crate::flatfile;
use crate::model::{example_gradient, loss_values, LossModel};

const FORMAT: &str = "fishdip-fisher";

/// Per-parameter importance: the mean squared per-example gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherScores {
    pub scores: Vec<f64>,
    pub n_samples_used: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    len: usize,
    n_samples_used: usize,
}

impl FisherScores {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header = Header {
            format: FORMAT.into(),
            len: self.scores.len(),
            n_samples_used: self.n_samples_used,
        };
        flatfile::write(path, &header, &flatfile::f64s_to_bytes(&self.scores))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (header, payload): (Header, _) = flatfile::read(path)?;
        if header.format != FORMAT {
            return contract(format!("{} is not a Fisher score file", path.display()));
        }
        let scores = flatfile::bytes_to_f64s(&payload)?;
        if scores.len() != header.len {
            return contract(format!(
                "Fisher file holds {} scores, header says {}",
                scores.len(),
                header.len
            ));
        }
        Ok(Self {
            scores,
            n_samples_used: header.n_samples_used,
        })
    }
}

/// Mean of squared per-example loss gradients over `examples`.
///
/// The loss gradient is the negated log-likelihood gradient, which the
/// square makes irrelevant. Squares are accumulated in slice order so the
/// result is bit-reproducible.
pub fn empirical_fisher<M: LossModel>(
    model: &M,
    store: &mut ParamStore,
    examples: &[&M::Example],
) -> Result<FisherScores> {
    if examples.is_empty() {
        return contract("empirical Fisher needs at least one example");
    }
    let mut scores = vec![0.0; store.len()];
    for ex in examples {
        let g = example_gradient(model, store, ex)?;
        for (s, gj) in scores.iter_mut().zip(&g) {
            *s += gj * gj;
        }
    }
    let inv = 1.0 / examples.len() as f64;
    scores.iter_mut().for_each(|s| *s *= inv);
    Ok(FisherScores {
        scores,
        n_samples_used: examples.len(),
    })
}

/// Ids of the `n` largest losses, ordered by descending loss and then
/// ascending id.
pub fn select_regressing(losses: &[(usize, f64)], n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return contract("n must be positive");
    }
    if losses.is_empty() {
        return contract("cannot select from an empty loss list");
    }
    let mut ranked = losses.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().take(n).map(|(id, _)| id).collect())
}

/// Outcome of one recalibration sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressingSweep {
    /// Current loss of every example, indexed like the pool.
    pub losses: Vec<f64>,
    /// Pool positions chosen by [`select_regressing`].
    pub selected: Vec<usize>,
}

/// Evaluates every example of `pool` without touching gradients and picks
/// the `n` most regressing ones.
pub fn sweep_regressing<M: LossModel>(
    model: &M,
    store: &ParamStore,
    pool: &[&M::Example],
    n: usize,
) -> Result<RegressingSweep> {
    if pool.is_empty() {
        return contract("regressing-sample sweep over an empty set");
    }
    let losses = loss_values(model, store, pool)?;
    let indexed: Vec<(usize, f64)> = losses.iter().copied().enumerate().collect();
    let selected = select_regressing(&indexed, n)?;
    Ok(RegressingSweep { losses, selected })
}

/// Fisher scores restricted to the `n` examples of `pool` with the largest
/// current loss. Squares are accumulated in pool order, not rank order, so
/// `n >= pool.len()` reproduces [`empirical_fisher`] on the pool exactly.
pub fn dynamic_fisher<M: LossModel>(
    model: &M,
    store: &mut ParamStore,
    pool: &[&M::Example],
    n: usize,
) -> Result<(FisherScores, RegressingSweep)> {
    let sweep = sweep_regressing(model, store, pool, n)?;
    let mut ids = sweep.selected.clone();
    ids.sort_unstable();
    let chosen: Vec<&M::Example> = ids.iter().map(|&i| pool[i]).collect();
    let scores = empirical_fisher(model, store, &chosen)?;
    Ok((scores, sweep))
}
