//! Test-only oracles shared by the integration suites. Nothing here calls
//! into the autodiff backward pass.
#![allow(dead_code)]

use fishdip::autodiff::ParamStore;

/// Central finite differences of `loss` with respect to every coordinate.
pub fn finite_difference_gradient(
    store: &ParamStore,
    h: f64,
    loss: impl Fn(&ParamStore) -> f64,
) -> Vec<f64> {
    let mut probe = store.clone();
    (0..store.len())
        .map(|j| {
            let orig = probe.data()[j];
            probe.data_mut()[j] = orig + h;
            let up = loss(&probe);
            probe.data_mut()[j] = orig - h;
            let down = loss(&probe);
            probe.data_mut()[j] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_j |a_j - b_j| / (|b_j| + 1e-8)`.
pub fn max_relative_error(auto: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(auto.len(), reference.len());
    auto.iter()
        .zip(reference)
        .map(|(a, r)| (a - r).abs() / (r.abs() + 1e-8))
        .fold(0.0, f64::max)
}
pub mod align;
pub mod codec;
pub mod fisher;
pub mod masks;
pub mod mininet;
pub mod toy;
pub mod trace;
