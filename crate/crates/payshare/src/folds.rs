//! Random balanced fold assignment for k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partition of `0..n` into k mutually exclusive, exhaustive folds
/// whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_of(&self, index: usize) -> usize {
        self.fold_of[index]
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Draw a uniformly random balanced partition of `0..n` into k folds.
pub fn make_folds<R: Rng>(n: usize, k: usize, rng: &mut R) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need k >= 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::InvalidInput(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    let base = n / k;
    let remainder = n % k;
    let mut fold_of = vec![0; n];
    let mut cursor = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < remainder);
        for &idx in &indices[cursor..cursor + size] {
            fold_of[idx] = fold;
        }
        cursor += size;
    }
    Ok(FoldAssignment { fold_of, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn sizes_for_443_by_10() {
        let mut rng = seeded_rng(1);
        let folds = make_folds(443, 10, &mut rng).unwrap();
        let mut sizes = folds.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![44, 44, 44, 44, 44, 44, 44, 45, 45, 45]);
    }

    #[test]
    fn leave_one_out_when_n_equals_k() {
        let mut rng = seeded_rng(2);
        let folds = make_folds(10, 10, &mut rng).unwrap();
        assert!(folds.fold_sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn too_few_samples_rejected() {
        let mut rng = seeded_rng(3);
        assert!(make_folds(5, 10, &mut rng).is_err());
        assert!(make_folds(5, 1, &mut rng).is_err());
    }

    #[test]
    fn deterministic_for_fixed_stream() {
        let a = make_folds(100, 7, &mut seeded_rng(42)).unwrap();
        let b = make_folds(100, 7, &mut seeded_rng(42)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn partition_property(n in 4usize..200, k in 2usize..12, seed in 0u64..1000) {
            prop_assume!(n >= k);
            let folds = make_folds(n, k, &mut seeded_rng(seed)).unwrap();
            let mut seen = BTreeSet::new();
            for fold in 0..k {
                for idx in folds.test_indices(fold) {
                    prop_assert!(seen.insert(idx), "index {} in two folds", idx);
                }
            }
            prop_assert_eq!(seen.len(), n);
            let sizes = folds.fold_sizes();
            let min = sizes.iter().min().unwrap();
            let max = sizes.iter().max().unwrap();
            prop_assert!(max - min <= 1);
        }
    }
}
