//! Tiny encoder-decoder sequence model and the loss interface used by
//! Fisher scoring and training.

mod checkpoint;
mod transformer;
mod vocab;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use transformer::{sinusoidal_positions, Bound, EncodedPair, ModelConfig, Seq2Seq};
pub use vocab::{SourceIds, Vocab, BOS, EOS, PAD, RESERVED, UNK};

use crate::autodiff::{accumulate_gradient, per_example_gradient, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Anything that can record a scalar loss per example on a tape.
pub trait LossModel {
    type Example;

    /// Records one loss node per element of `batch`, sharing one set of
    /// parameter leaves.
    fn losses(&self, tape: &mut Tape, store: &ParamStore, batch: &[&Self::Example]) -> Result<Vec<Var>>;
}

fn scalar(tape: &Tape, v: Var) -> Result<f64> {
    tape.value(v)
        .item()
        .ok_or_else(|| Error::Contract("loss is not a scalar".into()))
}

/// Loss values without gradients.
pub fn loss_values<M: LossModel>(model: &M, store: &ParamStore, examples: &[&M::Example]) -> Result<Vec<f64>> {
    if examples.is_empty() {
        return Ok(Vec::new());
    }
    let mut tape = Tape::new();
    let vars = model.losses(&mut tape, store, examples)?;
    vars.into_iter().map(|v| scalar(&tape, v)).collect()
}

/// Gradient of a single example's loss (see
/// [`crate::autodiff::per_example_gradient`]).
pub fn example_gradient<M: LossModel>(model: &M, store: &mut ParamStore, example: &M::Example) -> Result<Vec<f64>> {
    per_example_gradient(store, |tape, s| {
        let mut v = model.losses(tape, s, &[example])?;
        Ok(v.remove(0))
    })
}

/// Accumulates the gradient of the batch-mean loss into `store.grad` and
/// returns the per-example loss values.
pub fn batch_gradient<M: LossModel>(model: &M, store: &mut ParamStore, batch: &[&M::Example]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Contract("empty minibatch".into()));
    }
    let mut values = Vec::new();
    accumulate_gradient(store, |tape, s| {
        let vars = model.losses(tape, s, batch)?;
        values = vars.iter().map(|&v| scalar(tape, v)).collect::<Result<_>>()?;
        let mut total = vars[0];
        for &v in &vars[1..] {
            total = tape.add(total, v)?;
        }
        tape.scale(total, 1.0 / batch.len() as f64)
    })?;
    Ok(values)
}
