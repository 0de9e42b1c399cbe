use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of every sample to one of `k` disjoint folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn n_samples(&self) -> usize {
        self.assignment.len()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle followed by round-robin dealing, per class when stratified.
///
/// In the stratified case the dealing continues across classes, so each
/// class's leftovers land on the folds that are currently smallest and the
/// overall fold sizes still differ by at most one.
pub fn kfold_split(n: usize, labels: &[usize], k: usize, seed: u64, stratified: bool) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::param(format!("k must be >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::param(format!("cannot split {n} samples into {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; n];
    if stratified {
        if labels.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: labels.len(),
            });
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        if let Some((c, m)) = members.iter().enumerate().find(|(_, m)| !m.is_empty() && m.len() < k) {
            return Err(Error::param(format!(
                "class {c} has {} samples, fewer than k = {k}",
                m.len()
            )));
        }
        let mut next = 0;
        for m in members.iter_mut() {
            m.shuffle(&mut rng);
            for &i in m.iter() {
                assignment[i] = next;
                next = (next + 1) % k;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for (pos, &i) in order.iter().enumerate() {
            assignment[i] = pos % k;
        }
    }
    Ok(FoldPlan {
        k,
        seed,
        stratified,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_plain_split() {
        let p = kfold_split(960, &[], 3, 42, false).unwrap();
        assert_eq!(p.fold_sizes(), vec![320, 320, 320]);
    }

    #[test]
    fn n_equals_k() {
        let p = kfold_split(4, &[], 4, 1, false).unwrap();
        assert_eq!(p.fold_sizes(), vec![1; 4]);
    }

    #[test]
    fn stratified_kimia_shape() {
        let labels: Vec<usize> = (0..20).flat_map(|c| std::iter::repeat_n(c, 48)).collect();
        let p = kfold_split(960, &labels, 3, 42, true).unwrap();
        for f in 0..3 {
            for c in 0..20 {
                let count = p.test_indices(f).iter().filter(|&&i| labels[i] == c).count();
                assert_eq!(count, 16);
            }
        }
    }

    #[test]
    fn preconditions() {
        assert!(kfold_split(10, &[], 1, 0, false).is_err());
        assert!(kfold_split(2, &[], 3, 0, false).is_err());
        assert!(kfold_split(4, &[0, 0, 0, 1], 2, 0, true).is_err());
        assert!(kfold_split(4, &[0, 0], 2, 0, true).is_err());
    }

    #[test]
    fn same_seed_same_plan() {
        let labels = vec![0, 1, 0, 1, 0, 1, 2, 2, 2];
        assert_eq!(
            kfold_split(9, &labels, 3, 7, true).unwrap(),
            kfold_split(9, &labels, 3, 7, true).unwrap()
        );
        assert_ne!(
            kfold_split(90, &[], 3, 7, false).unwrap(),
            kfold_split(90, &[], 3, 8, false).unwrap()
        );
    }
}
