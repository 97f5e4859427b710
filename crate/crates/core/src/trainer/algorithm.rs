//! The sparse fine-tuning loop, independent of the model being trained.

use log::{debug, info};
use rand::seq::{index, SliceRandom};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::masking::{
    build_mask, empirical_fisher, masked_update, select_regressing, AdamConfig, OptimizerState, SparsityMask,
};
use crate::model::{batch_gradient, loss_values, LossModel};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Full,
    FixedFish,
    Fishdip,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::FixedFish => "fixed_fish",
            Method::Fishdip => "fishdip",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Method::Full),
            "fixed_fish" => Ok(Method::FixedFish),
            "fishdip" => Ok(Method::Fishdip),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Which examples compete for the regressing set at a recalibration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranking {
    /// Every training example.
    #[default]
    FullSet,
    /// Only the minibatch about to be trained on.
    Minibatch,
}

/// Hyperparameters of the loop itself.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig {
    pub method: Method,
    pub k_percent: f64,
    pub m_steps: usize,
    pub n_regressing: usize,
    pub fisher_init_samples: usize,
    pub total_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub ranking: Ranking,
    pub adam: AdamConfig,
    /// Keep a copy of the parameters after every step.
    pub record_params: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub batch: Vec<usize>,
    pub mean_loss: f64,
    /// Parameters whose value changed in this step.
    pub updated: usize,
    #[serde(skip)]
    pub losses: Vec<f64>,
    #[serde(skip)]
    pub params: Option<Vec<f64>>,
}

/// Training-set losses taken at a recalibration point (or at the end).
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub t: usize,
    pub losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskEvent {
    pub t: usize,
    /// Regressing examples chosen (fishdip) in rank order.
    pub selected: Vec<usize>,
    /// Examples whose gradients formed the Fisher scores, ascending.
    pub fisher_examples: Vec<usize>,
    pub mask: SparsityMask,
    /// Overlap with the previous mask; `None` for the first one.
    pub jaccard: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub steps: Vec<StepRecord>,
    pub sweeps: Vec<Sweep>,
    pub mask_events: Vec<MaskEvent>,
}

/// Minibatches drawn without replacement from a reshuffled permutation.
pub struct BatchSampler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            rng: stream(seed, "batches"),
            order: (0..n).collect(),
            pos: n,
            batch_size: batch_size.min(n),
        }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        (0..self.batch_size)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order.shuffle(&mut self.rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

/// The examples used for the one-off Fisher estimate of fixed FISH,
/// ascending.
pub fn fisher_init_sample(n: usize, samples: usize, seed: u64) -> Vec<usize> {
    let mut ids = index::sample(&mut stream(seed, "fisher-init"), n, samples.min(n)).into_vec();
    ids.sort_unstable();
    ids
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Losses of the whole training set; a non-finite loss is reported with
/// the first example that produced it.
fn sweep<M: LossModel>(model: &M, store: &ParamStore, train: &[&M::Example], t: usize) -> Result<Vec<f64>> {
    let diverged = |i: usize, loss: f64| Error::Diverged {
        step: t,
        loss,
        batch: vec![i],
    };
    match loss_values(model, store, train) {
        Ok(losses) => match losses.iter().position(|l| !l.is_finite()) {
            Some(i) => Err(diverged(i, losses[i])),
            None => Ok(losses),
        },
        Err(Error::Numeric { .. }) => {
            for (i, ex) in train.iter().enumerate() {
                match loss_values(model, store, &[*ex]) {
                    Ok(l) if l[0].is_finite() => {}
                    Ok(l) => return Err(diverged(i, l[0])),
                    Err(Error::Numeric { .. }) => return Err(diverged(i, f64::NAN)),
                    Err(e) => return Err(e),
                }
            }
            Err(diverged(0, f64::NAN))
        }
        Err(e) => Err(e),
    }
}

impl LoopConfig {
    pub fn validate(&self, n_train: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if n_train == 0 {
            return bad("empty training set".into());
        }
        if !(self.k_percent > 0.0 && self.k_percent <= 100.0) {
            return bad(format!("k_percent must lie in (0, 100], got {}", self.k_percent));
        }
        if self.m_steps == 0 || self.n_regressing == 0 || self.batch_size == 0 || self.fisher_init_samples == 0 {
            return bad("m_steps, n_regressing, batch_size and fisher_init_samples must be positive".into());
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.adam.lr));
        }
        Ok(())
    }
}

/// Runs the training loop on `train`.
///
/// At every `t` with `t % m_steps == 0`, including `t = 0`, the training
/// losses are swept. FISH-DIP then selects the `n` most regressing
/// examples and rebuilds the mask from their Fisher scores; fixed FISH
/// builds its mask once at `t = 0` from a random sample; full fine-tuning
/// uses an all-true mask. Every step trains on one minibatch with a masked
/// Adam update. `on_eval(t, store)` runs at each later recalibration point
/// and after the last step.
pub fn run_loop<M: LossModel>(
    model: &M,
    store: &mut ParamStore,
    train: &[&M::Example],
    cfg: &LoopConfig,
    mut on_eval: impl FnMut(usize, &ParamStore) -> Result<()>,
) -> Result<Trace> {
    cfg.validate(train.len())?;
    let n_params = store.len();
    let mut trace = Trace::default();
    let mut opt = OptimizerState::new(n_params, cfg.adam);
    let mut mask = match cfg.method {
        Method::Full => SparsityMask::all(n_params),
        _ => SparsityMask::none(n_params),
    };
    let mut sampler = BatchSampler::new(train.len(), cfg.batch_size, cfg.seed);
    let mut pending_batch: Option<Vec<usize>> = None;
    store.zero_grad();

    for t in 0..cfg.total_steps.max(1) {
        if t % cfg.m_steps == 0 {
            let losses = sweep(model, store, train, t)?;
            let rebuild = match cfg.method {
                Method::Full => None,
                Method::FixedFish if t > 0 => None,
                Method::FixedFish => Some((Vec::new(), fisher_init_sample(train.len(), cfg.fisher_init_samples, cfg.seed))),
                Method::Fishdip => {
                    let pool: Vec<usize> = match cfg.ranking {
                        Ranking::FullSet => (0..train.len()).collect(),
                        Ranking::Minibatch => {
                            let b = sampler.next_batch();
                            pending_batch = Some(b.clone());
                            b
                        }
                    };
                    let ranked: Vec<(usize, f64)> = pool.iter().map(|&i| (i, losses[i])).collect();
                    let selected = select_regressing(&ranked, cfg.n_regressing)?;
                    let mut ids = selected.clone();
                    ids.sort_unstable();
                    ids.dedup();
                    Some((selected, ids))
                }
            };
            if let Some((selected, ids)) = rebuild {
                let examples: Vec<&M::Example> = ids.iter().map(|&i| train[i]).collect();
                let scores = empirical_fisher(model, store, &examples)?;
                let new_mask = build_mask(&scores, cfg.k_percent)?;
                let jaccard = match trace.mask_events.last() {
                    Some(prev) => Some(prev.mask.jaccard(&new_mask)?),
                    None => None,
                };
                debug!(
                    "t={t}: mask rebuilt from {} examples, jaccard {:?}",
                    ids.len(),
                    jaccard
                );
                mask = new_mask.clone();
                trace.mask_events.push(MaskEvent {
                    t,
                    selected,
                    fisher_examples: ids,
                    mask: new_mask,
                    jaccard,
                });
            }
            trace.sweeps.push(Sweep { t, losses });
            if t > 0 {
                on_eval(t, store)?;
            }
        }
        if t >= cfg.total_steps {
            break;
        }
        let batch_ids = pending_batch.take().unwrap_or_else(|| sampler.next_batch());
        let batch: Vec<&M::Example> = batch_ids.iter().map(|&i| train[i]).collect();
        let losses = match batch_gradient(model, store, &batch) {
            Ok(l) => l,
            Err(Error::Numeric { .. }) => vec![f64::NAN],
            Err(e) => return Err(e),
        };
        let mean_loss = mean(&losses);
        if !mean_loss.is_finite() {
            store.zero_grad();
            return Err(Error::Diverged {
                step: t,
                loss: mean_loss,
                batch: batch_ids,
            });
        }
        let updated = masked_update(store, &mask, &mut opt)?;
        if t % 50 == 0 {
            info!("step {t}: loss {mean_loss:.4}");
        }
        trace.steps.push(StepRecord {
            t,
            batch: batch_ids,
            mean_loss,
            updated,
            losses,
            params: cfg.record_params.then(|| store.data().to_vec()),
        });
    }
    if cfg.total_steps > 0 {
        let t = cfg.total_steps;
        trace.sweeps.push(Sweep {
            t,
            losses: sweep(model, store, train, t)?,
        });
        on_eval(t, store)?;
    }
    Ok(trace)
}
