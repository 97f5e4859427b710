use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::{contract, Result};

use super::mask::SparsityMask;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments over the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
        }
    }
}

/// One Adam step from `store.grad`, applied only where `mask` is active.
///
/// Moments advance everywhere from the raw gradient; it is the parameter
/// delta that is masked, so frozen entries stay bit-identical. The gradient
/// is cleared afterwards. Returns how many parameters changed value.
pub fn masked_update(store: &mut ParamStore, mask: &SparsityMask, opt: &mut OptimizerState) -> Result<usize> {
    let n = store.len();
    if mask.len() != n {
        return contract(format!("mask covers {} parameters, store has {n}", mask.len()));
    }
    if opt.first_moment.len() != n || opt.second_moment.len() != n {
        return contract("optimizer state does not match the parameter store");
    }
    let c = opt.config;
    opt.step_count += 1;
    let t = opt.step_count as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    let (data, grad) = store.data_and_grad_mut();
    let bits = mask.bits();
    let mut changed = 0;
    for j in 0..n {
        let g = grad[j];
        let m = c.beta1 * opt.first_moment[j] + (1.0 - c.beta1) * g;
        let v = c.beta2 * opt.second_moment[j] + (1.0 - c.beta2) * g * g;
        opt.first_moment[j] = m;
        opt.second_moment[j] = v;
        if bits[j] {
            let before = data[j];
            data[j] -= c.lr * (m / bc1) / ((v / bc2).sqrt() + c.eps);
            changed += usize::from(data[j] != before);
        }
    }
    store.zero_grad();
    Ok(changed)
}
