use fishdip::autodiff::ParamStore;
use fishdip::model::{EncodedPair, ModelConfig, Seq2Seq, BOS, EOS};

use super::finite_difference_gradient;

pub fn tiny_model(seed: u64) -> (Seq2Seq, ParamStore) {
    Seq2Seq::build(ModelConfig {
        d_model: 4,
        n_heads: 2,
        n_enc_layers: 1,
        n_dec_layers: 1,
        d_ff: 6,
        max_len: 8,
        ..ModelConfig::new(12, seed)
    })
    .unwrap()
}

pub fn toy_pairs() -> Vec<EncodedPair> {
    vec![
        EncodedPair { input: vec![4, 5, 6], target: vec![BOS, 7, 8, EOS] },
        EncodedPair { input: vec![9, 10], target: vec![BOS, 9, EOS] },
        EncodedPair { input: vec![11, 4, 4, 5], target: vec![BOS, 6, 11, 10, EOS] },
        EncodedPair { input: vec![8], target: vec![BOS, EOS] },
    ]
}

/// Mean squared finite-difference gradient, computed without the tape's
/// backward pass.
pub fn fd_fisher(model: &Seq2Seq, store: &ParamStore, pairs: &[EncodedPair]) -> Vec<f64> {
    let mut acc = vec![0.0; store.len()];
    for p in pairs {
        let g = finite_difference_gradient(store, 1e-5, |s| model.example_loss(s, p).unwrap());
        for (a, gj) in acc.iter_mut().zip(g) {
            *a += gj * gj;
        }
    }
    acc.iter().map(|a| a / pairs.len() as f64).collect()
}

pub fn scaled_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().cloned().fold(0.0, f64::max);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (y.abs() + 1e-6 * scale))
        .fold(0.0, f64::max)
}

