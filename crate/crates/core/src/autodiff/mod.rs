//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] is built fresh for every forward pass. Parameters live in a
//! [`ParamStore`] and enter the tape as leaves through [`Tape::param`];
//! [`Tape::backward`] writes their gradients back into the store.

mod params;
mod tape;
mod tensor;

pub use params::{ParamStore, Segment};
pub use tape::{log_sum_exp, softmax_in_place, OpKind, Tape, Var};
pub use tensor::Tensor;

use crate::error::{Error, Result};

/// Evaluates a single op on constant inputs and returns its value.
pub fn tensor_op(kind: OpKind, inputs: &[Tensor]) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = tape.apply(kind, &vars)?;
    Ok(tape.value(out).clone())
}

/// Runs `forward` on a fresh tape and returns the scalar loss value without
/// touching gradients.
pub fn loss_value<F>(store: &ParamStore, forward: F) -> Result<f64>
where
    F: FnOnce(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = forward(&mut tape, store)?;
    tape.value(loss)
        .item()
        .ok_or_else(|| Error::Contract("loss is not a scalar".into()))
}

/// Forward and backward on a fresh tape, accumulating into `store.grad`.
/// Returns the loss value.
pub fn accumulate_gradient<F>(store: &mut ParamStore, forward: F) -> Result<f64>
where
    F: FnOnce(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = forward(&mut tape, store)?;
    let value = tape
        .value(loss)
        .item()
        .ok_or_else(|| Error::Contract("loss is not a scalar".into()))?;
    tape.backward(loss, store)?;
    Ok(value)
}

/// Gradient of one example's loss as a flat vector.
///
/// `store.grad` must be zero on entry and is zero again on return. The
/// exclusive borrow of `store` rules out nested invocations from inside
/// `forward`.
pub fn per_example_gradient<F>(store: &mut ParamStore, forward: F) -> Result<Vec<f64>>
where
    F: FnOnce(&mut Tape, &ParamStore) -> Result<Var>,
{
    if !store.grad_is_zero() {
        return Err(Error::State(
            "per-example gradient requested while the store holds a pending gradient".into(),
        ));
    }
    let result = accumulate_gradient(store, forward);
    let grad = store.grad().to_vec();
    store.zero_grad();
    result.map(|_| grad)
}
