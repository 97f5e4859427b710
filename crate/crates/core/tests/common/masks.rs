use fishdip::autodiff::ParamStore;
use fishdip::masking::{build_mask, masked_update, AdamConfig, FisherScores, OptimizerState, SparsityMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_scores(n: usize, seed: u64) -> FisherScores {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FisherScores { scores: (0..n).map(|_| rng.random::<f64>()).collect(), n_samples_used: 1 }
}

/// `ceil(k / 100 * n)` in exact integer arithmetic, with k given in
/// hundredths of a percent.
pub fn ceil_size(n: usize, k_hundredths: usize) -> usize {
    (n * k_hundredths).div_ceil(10_000)
}


/// Runs `steps` masked Adam updates with random gradients, rebuilding a 1%
/// mask every `every` steps. Returns how many never-masked coordinates moved
/// and how many ever-masked ones did.
pub fn frozen_check(n: usize, steps: u64, every: u64, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    store.push("w", vec![n], (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let init = store.data().to_vec();
    let mut opt = OptimizerState::new(n, AdamConfig::with_lr(1e-2));
    let mut ever = vec![false; n];
    let mut mask = SparsityMask::none(n);
    for step in 0..steps {
        if step % every == 0 {
            mask = build_mask(&random_scores(n, step), 1.0).unwrap();
            for j in mask.active_indices() {
                ever[j] = true;
            }
        }
        for g in store.grad_mut() {
            *g = rng.random_range(-1.0..1.0);
        }
        let changed = masked_update(&mut store, &mask, &mut opt).unwrap();
        assert!(changed <= mask.popcount());
    }
    let (mut violations, mut moved) = (0, 0);
    for j in 0..n {
        let same = store.data()[j].to_bits() == init[j].to_bits();
        if ever[j] {
            moved += usize::from(!same);
        } else {
            violations += usize::from(!same);
        }
    }
    (violations, moved)
}
