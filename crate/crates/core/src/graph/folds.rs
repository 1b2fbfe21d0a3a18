use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GraphError;

/// Assignment of every graph to one of `fold_count` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_count: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified `k`-fold split of graphs with the given class labels.
///
/// Each class is shuffled under `seed`, then all classes (in ascending label
/// order) are dealt round-robin with one running fold pointer, so fold sizes
/// differ by at most one and each fold's per-class count is within one of
/// the exact share.
pub fn split_folds(labels: &[usize], k: usize, seed: u64) -> Result<FoldSplit, GraphError> {
    if labels.is_empty() {
        return Err(GraphError::EmptyDataset);
    }
    if k < 2 || k > labels.len() {
        return Err(GraphError::FoldCount { k, graphs: labels.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().copied().max().unwrap() + 1;
    let mut assignments = vec![0; labels.len()];
    let mut next = 0;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldSplit { fold_count: k, assignments, seed })
}
