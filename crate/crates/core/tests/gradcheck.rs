//! Autodiff gradients against central finite differences.

use fishdip::autodiff::{accumulate_gradient, Tensor};

mod common;
use common::mininet::{gradcheck_error, MiniNet};

#[test]
fn gradients_match_central_differences_on_random_mini_networks() {
    for seed in 0..50u64 {
        let err = gradcheck_error(seed);
        assert!(err < 1e-4, "seed {seed}: max relative error {err}");
    }
}

#[test]
fn gradients_are_additive_over_examples() {
    let a = MiniNet::new(101);
    let mut b = MiniNet::new(101);
    b.targets.iter_mut().for_each(|t| *t = 0);
    b.input = Tensor::matrix(
        a.input.rows(),
        a.input.cols(),
        a.input.values().iter().map(|v| -v).collect(),
    )
    .unwrap();
    let mut store = a.store.clone();
    let ga = fishdip::autodiff::per_example_gradient(&mut store, |t, s| a.forward(t, s)).unwrap();
    let gb = fishdip::autodiff::per_example_gradient(&mut store, |t, s| b.forward(t, s)).unwrap();
    assert_ne!(ga, gb);
    accumulate_gradient(&mut store, |t, s| {
        let la = a.forward(t, s)?;
        let lb = b.forward(t, s)?;
        t.add(la, lb)
    })
    .unwrap();
    for ((x, y), z) in ga.iter().zip(&gb).zip(store.grad()) {
        assert!((x + y - z).abs() <= 1e-10, "{x} + {y} != {z}");
    }
}

#[test]
fn forward_and_backward_are_bit_deterministic() {
    let net = MiniNet::new(7);
    let run = || {
        let mut store = net.store.clone();
        let l = accumulate_gradient(&mut store, |t, s| net.forward(t, s)).unwrap();
        (l.to_bits(), store.grad().iter().map(|g| g.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}
