use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Assignment of every row to one of `k` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// (train rows, test rows) for `fold`, both in ascending row order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// K-fold split stratified on the joint (y, a) cell.
///
/// Rows of each cell are shuffled and dealt round-robin; the dealing
/// position carries over from one cell to the next so fold sizes stay
/// balanced as well.
pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let n = ds.n_rows();
    if k < 2 || k > n {
        return Err(Error::InvalidFold { k, n });
    }
    let mut rng = seed::rng(seed::derive(seed, &[&"stratified_kfold"]));
    let mut assignments = vec![0usize; n];
    let mut next = 0usize;
    for (y, row) in ds.cell_indices().into_iter().enumerate() {
        for (a, mut cell) in row.into_iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::DegenerateGroup(format!("stratum (y={y}, a={a}) has no rows")));
            }
            cell.shuffle(&mut rng);
            for i in cell {
                assignments[i] = next % k;
                next += 1;
            }
        }
    }
    Ok(FoldPlan { k, assignments })
}
