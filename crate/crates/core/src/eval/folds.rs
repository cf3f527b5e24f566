use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// A partition of sample indices into k folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
    pub stratified: bool,
}

fn check_args(n: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Argument(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    Ok(())
}

/// Fisher-Yates shuffle of `0..n`, then contiguous chunks; the first
/// `n % k` folds hold one extra sample.
pub fn shuffled_fold_indices(n: usize, k: usize, rng: &mut Rng) -> Result<FoldPlan> {
    check_args(n, k)?;
    let perm = rng.permutation(n);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(perm[start..start + size].to_vec());
        start += size;
    }
    Ok(FoldPlan {
        folds,
        seed: rng.seed(),
        stratified: false,
    })
}

/// Shuffles within each class, then deals the class-grouped sequence
/// round-robin, so fold sizes still differ by at most one.
pub fn stratified_fold_indices(labels: &[usize], k: usize, rng: &mut Rng) -> Result<FoldPlan> {
    let n = labels.len();
    check_args(n, k)?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut order = Vec::with_capacity(n);
    for c in 0..classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        rng.shuffle(&mut members);
        order.extend(members);
    }
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, idx) in order.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    Ok(FoldPlan {
        folds,
        seed: rng.seed(),
        stratified: true,
    })
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn n(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    pub fn test(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Indices of every fold not listed in `excluded`, in fold order.
    pub fn indices_excluding(&self, excluded: &[usize]) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(f, _)| !excluded.contains(f))
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.folds.iter().map(Vec::len).collect()
    }
}
