use fishdip::align::{score_pairs, AlignScoring, AlignedPair};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Best score over every global alignment, enumerated path by path.
pub fn exhaustive_best(a: &[String], b: &[String], scoring: &AlignScoring) -> f64 {
    fn walk(
        a: &[String],
        b: &[String],
        i: usize,
        j: usize,
        path: &mut Vec<AlignedPair>,
        scoring: &AlignScoring,
        best: &mut f64,
    ) {
        if i == a.len() && j == b.len() {
            let s = score_pairs(a, b, path, scoring);
            if s > *best {
                *best = s;
            }
            return;
        }
        if i < a.len() && j < b.len() {
            path.push((Some(i), Some(j)));
            walk(a, b, i + 1, j + 1, path, scoring, best);
            path.pop();
        }
        if i < a.len() {
            path.push((Some(i), None));
            walk(a, b, i + 1, j, path, scoring, best);
            path.pop();
        }
        if j < b.len() {
            path.push((None, Some(j)));
            walk(a, b, i, j + 1, path, scoring, best);
            path.pop();
        }
    }
    let mut best = f64::NEG_INFINITY;
    walk(a, b, 0, 0, &mut Vec::new(), scoring, &mut best);
    best
}

pub fn random_tokens(rng: &mut ChaCha8Rng) -> Vec<String> {
    let len = rng.random_range(0..=8);
    (0..len)
        .map(|_| ["a", "b", "c", "d"][rng.random_range(0..4)].to_string())
        .collect()
}

