//! k-fold partitioning, optionally keeping groups (e.g. participants) whole.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// `k` disjoint index lists that together cover `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Indices outside fold `i`, ascending.
    pub fn training_indices(&self, i: usize) -> Vec<usize> {
        let mut rest: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        rest.sort_unstable();
        rest
    }
}

/// Splits `n` items into `k` folds. Without groups the fold sizes differ by at
/// most one; with groups every group lands in exactly one fold, balanced
/// greedily by item count. Deterministic for a fixed seed.
pub fn kfold_split<G: Ord>(n: usize, k: usize, seed: u64, groups: Option<&[G]>) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("k-fold: k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let folds = match groups {
        None => {
            if k > n {
                return Err(Error::invalid(format!("k-fold: k = {k} exceeds the {n} items")));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let (base, extra) = (n / k, n % k);
            let mut folds = Vec::with_capacity(k);
            let mut start = 0;
            for i in 0..k {
                let size = base + usize::from(i < extra);
                let mut fold = order[start..start + size].to_vec();
                fold.sort_unstable();
                folds.push(fold);
                start += size;
            }
            folds
        }
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::invalid(format!(
                    "k-fold: {} group labels for {n} items",
                    labels.len()
                )));
            }
            let mut by_group: BTreeMap<&G, Vec<usize>> = BTreeMap::new();
            for (i, g) in labels.iter().enumerate() {
                by_group.entry(g).or_default().push(i);
            }
            if k > by_group.len() {
                return Err(Error::invalid(format!(
                    "k-fold: k = {k} exceeds the {} groups",
                    by_group.len()
                )));
            }
            let mut members: Vec<Vec<usize>> = by_group.into_values().collect();
            members.shuffle(&mut rng);
            // stable: equal-sized groups keep their shuffled order
            members.sort_by_key(|m| std::cmp::Reverse(m.len()));
            let mut folds = vec![Vec::new(); k];
            for group in members {
                let target = (0..k).min_by_key(|&i| (folds[i].len(), i)).expect("k ≥ 2");
                folds[target].extend(group);
            }
            for f in &mut folds {
                f.sort_unstable();
            }
            folds
        }
    };
    Ok(FoldPlan { folds })
}
