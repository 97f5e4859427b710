use std::path::Path;

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::flatfile;

use super::fisher::FisherScores;

const FORMAT: &str = "fishdip-mask";

/// The set of parameters allowed to change at a training step.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsityMask {
    active: BitVec<u8, Lsb0>,
    k_percent: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    len: usize,
    k_percent: f64,
}

/// Number of active parameters for a `k` percent mask over `len` entries.
pub fn mask_size(len: usize, k_percent: f64) -> usize {
    // Guard against 0.1 + 0.2 style noise pushing an exact product up by one.
    let exact = k_percent * len as f64 / 100.0;
    let rounded = exact.round();
    let n = if (exact - rounded).abs() < 1e-9 * exact.max(1.0) {
        rounded
    } else {
        exact.ceil()
    };
    (n as usize).min(len)
}

impl SparsityMask {
    /// Nothing active; the state before the first recalibration.
    pub fn none(len: usize) -> Self {
        Self {
            active: bitvec![u8, Lsb0; 0; len],
            k_percent: 0.0,
        }
    }

    /// Everything active (full fine-tuning).
    pub fn all(len: usize) -> Self {
        Self {
            active: bitvec![u8, Lsb0; 1; len],
            k_percent: 100.0,
        }
    }

    /// A mask with exactly the listed flat indices active.
    pub fn from_indices(len: usize, indices: &[usize]) -> Result<Self> {
        let mut active = bitvec![u8, Lsb0; 0; len];
        for &i in indices {
            if i >= len {
                return contract(format!("mask index {i} out of range for {len} parameters"));
            }
            active.set(i, true);
        }
        let k_percent = if len == 0 {
            0.0
        } else {
            100.0 * active.count_ones() as f64 / len as f64
        };
        Ok(Self { active, k_percent })
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn k_percent(&self) -> f64 {
        self.k_percent
    }

    pub fn popcount(&self) -> usize {
        self.active.count_ones()
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.active[j]
    }

    pub fn bits(&self) -> &BitSlice<u8, Lsb0> {
        &self.active
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter_ones()
    }

    /// |A ∩ B| / |A ∪ B|, with two empty masks counting as identical.
    pub fn jaccard(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return contract("jaccard of masks with different lengths");
        }
        let both = (self.active.clone() & &other.active).count_ones();
        let either = (self.active.clone() | &other.active).count_ones();
        Ok(if either == 0 { 1.0 } else { both as f64 / either as f64 })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header = Header {
            format: FORMAT.into(),
            len: self.len(),
            k_percent: self.k_percent,
        };
        flatfile::write(path, &header, self.active.as_raw_slice())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (header, payload): (Header, Vec<u8>) = flatfile::read(path)?;
        if header.format != FORMAT {
            return contract(format!("{} is not a mask file", path.display()));
        }
        if payload.len() != header.len.div_ceil(8) {
            return contract("mask payload does not match its declared length");
        }
        let mut active = BitVec::<u8, Lsb0>::from_vec(payload);
        active.truncate(header.len);
        Ok(Self {
            active,
            k_percent: header.k_percent,
        })
    }
}

/// Keeps the `ceil(k/100 * len)` highest scores over the whole flat vector.
/// Equal scores go to the lower index.
pub fn build_mask(scores: &FisherScores, k_percent: f64) -> Result<SparsityMask> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return contract(format!("k must lie in (0, 100], got {k_percent}"));
    }
    let len = scores.len();
    let keep = mask_size(len, k_percent);
    let mut order: Vec<usize> = (0..len).collect();
    let s = &scores.scores;
    let by_rank = |a: &usize, b: &usize| s[*b].total_cmp(&s[*a]).then(a.cmp(b));
    if keep > 0 && keep < len {
        order.select_nth_unstable_by(keep - 1, by_rank);
    }
    let mut active = bitvec![u8, Lsb0; 0; len];
    for &j in &order[..keep] {
        active.set(j, true);
    }
    Ok(SparsityMask { active, k_percent })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(v: Vec<f64>) -> FisherScores {
        FisherScores {
            scores: v,
            n_samples_used: 1,
        }
    }

    #[test]
    fn size_is_ceiling() {
        assert_eq!(mask_size(1000, 1.0), 10);
        assert_eq!(mask_size(997, 1.0), 10);
        assert_eq!(mask_size(1000, 0.5), 5);
        assert_eq!(mask_size(123456, 5.0), 6173);
        assert_eq!(mask_size(3, 100.0), 3);
    }

    #[test]
    fn keeps_largest_scores() {
        let m = build_mask(&scores((0..1000).map(f64::from).collect()), 1.0).unwrap();
        assert_eq!(m.active_indices().collect::<Vec<_>>(), (990..1000).collect::<Vec<_>>());
    }

    #[test]
    fn ties_go_to_lower_index() {
        let m = build_mask(&scores(vec![2.0; 1000]), 0.5).unwrap();
        assert_eq!(m.active_indices().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_k_out_of_range() {
        let s = scores(vec![1.0; 4]);
        for k in [0.0, -1.0, 100.5, f64::NAN] {
            assert!(build_mask(&s, k).is_err());
        }
    }

    #[test]
    fn jaccard_and_file_roundtrip() {
        let a = SparsityMask::from_indices(13, &[0, 3, 12]).unwrap();
        let b = SparsityMask::from_indices(13, &[3, 12, 5]).unwrap();
        assert!((a.jaccard(&b).unwrap() - 0.5).abs() < 1e-15);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        a.write(&p).unwrap();
        assert_eq!(SparsityMask::read(&p).unwrap(), a);
    }
}
