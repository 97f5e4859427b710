//! Needleman–Wunsch global alignment of token sequences.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// How two tokens are scored against each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    /// `match` for equal tokens, `mismatch` otherwise.
    #[default]
    Exact,
    /// `1 - 2 * levenshtein(a, b) / (|a| + |b|)`, in characters.
    NormalizedEdit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignScoring {
    pub match_score: f64,
    pub mismatch: f64,
    pub gap: f64,
    pub similarity: Similarity,
}

impl Default for AlignScoring {
    fn default() -> Self {
        Self {
            match_score: 1.0,
            mismatch: -1.0,
            gap: -1.0,
            similarity: Similarity::Exact,
        }
    }
}

impl AlignScoring {
    // Written negated so NaN scores are rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(match_score: f64, mismatch: f64, gap: f64, similarity: Similarity) -> Result<Self> {
        if !(match_score > mismatch) || !(gap < match_score) {
            return contract(format!(
                "alignment scoring needs match > mismatch and gap < match, got {match_score}/{mismatch}/{gap}"
            ));
        }
        Ok(Self {
            match_score,
            mismatch,
            gap,
            similarity,
        })
    }

    /// Scoring used by the decoder: unit costs with typo-tolerant matches.
    pub fn normalized_edit() -> Self {
        Self {
            similarity: Similarity::NormalizedEdit,
            ..Self::default()
        }
    }

    pub fn pair_score(&self, a: &str, b: &str) -> f64 {
        match self.similarity {
            Similarity::Exact => {
                if a == b {
                    self.match_score
                } else {
                    self.mismatch
                }
            }
            Similarity::NormalizedEdit => {
                if a == b {
                    return self.match_score;
                }
                let total = a.chars().count() + b.chars().count();
                let dist = strsim::levenshtein(a, b);
                1.0 - 2.0 * dist as f64 / total as f64
            }
        }
    }
}

/// One column of an alignment: an index into each sequence, or a gap.
pub type AlignedPair = (Option<usize>, Option<usize>);

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub pairs: Vec<AlignedPair>,
    pub score: f64,
}

impl Alignment {
    /// For every index of `a`, the index of `b` it is paired with.
    pub fn a_to_b(&self, len_a: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; len_a];
        for &(i, j) in &self.pairs {
            if let (Some(i), Some(j)) = (i, j) {
                map[i] = Some(j);
            }
        }
        map
    }
}

/// Sum of pair scores along `pairs`, folded left to right.
pub fn score_pairs<S: AsRef<str>>(a: &[S], b: &[S], pairs: &[AlignedPair], scoring: &AlignScoring) -> f64 {
    pairs.iter().fold(0.0, |acc, &p| {
        acc + match p {
            (Some(i), Some(j)) => scoring.pair_score(a[i].as_ref(), b[j].as_ref()),
            _ => scoring.gap,
        }
    })
}

#[derive(Clone, Copy)]
enum Step {
    Diag,
    Up,
    Left,
}

/// Maximum-score global alignment of `a` against `b`.
///
/// Traceback prefers a diagonal move, then a gap in `b`, then a gap in `a`,
/// so the result is unique.
pub fn needleman_wunsch<S: AsRef<str>>(a: &[S], b: &[S], scoring: &AlignScoring) -> Alignment {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut score = vec![0.0; (n + 1) * w];
    let mut step = vec![Step::Diag; (n + 1) * w];
    for i in 1..=n {
        score[i * w] = score[(i - 1) * w] + scoring.gap;
        step[i * w] = Step::Up;
    }
    for j in 1..=m {
        score[j] = score[j - 1] + scoring.gap;
        step[j] = Step::Left;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = score[(i - 1) * w + j - 1] + scoring.pair_score(a[i - 1].as_ref(), b[j - 1].as_ref());
            let up = score[(i - 1) * w + j] + scoring.gap;
            let left = score[i * w + j - 1] + scoring.gap;
            let (s, st) = if diag >= up && diag >= left {
                (diag, Step::Diag)
            } else if up >= left {
                (up, Step::Up)
            } else {
                (left, Step::Left)
            };
            score[i * w + j] = s;
            step[i * w + j] = st;
        }
    }
    let mut pairs = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match step[i * w + j] {
            Step::Diag => {
                i -= 1;
                j -= 1;
                pairs.push((Some(i), Some(j)));
            }
            Step::Up => {
                i -= 1;
                pairs.push((Some(i), None));
            }
            Step::Left => {
                j -= 1;
                pairs.push((None, Some(j)));
            }
        }
    }
    pairs.reverse();
    let score = score[n * w + m];
    Alignment { pairs, score }
}
