use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Assignment of every utterance to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    /// Fold index per dataset position.
    folds: Vec<usize>,
    ids: Vec<String>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id).map(|p| self.folds[p])
    }

    /// Dataset positions in fold `f`, ascending.
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == f).collect()
    }

    /// Dataset positions outside fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != f).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn assignment(&self) -> impl Iterator<Item = (&str, usize)> {
        self.ids.iter().map(String::as_str).zip(self.folds.iter().copied())
    }
}

/// Seeded shuffle, then round-robin deal into `k` folds.
pub fn kfold_split(d: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > d.len() {
        return Err(Error::Invalid(format!(
            "cannot split {} utterances into {k} folds",
            d.len()
        )));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut seed::rng(&[seed, k as u64]));
    let mut folds = vec![0; d.len()];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(FoldPlan {
        k,
        folds,
        ids: d.iter().map(|u| u.id.clone()).collect(),
    })
}

/// Keeps exactly `split` examples of every class, chosen by a seeded shuffle
/// within the class. Survivors keep their original relative order.
pub fn subsample_per_class(d: &Dataset, split: usize, seed: u64) -> Result<Dataset> {
    if split == 0 {
        return Err(Error::Invalid("split must be at least 1".into()));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, u) in d.iter().enumerate() {
        by_class.entry(u.label.as_str()).or_default().push(i);
    }
    let mut keep = Vec::with_capacity(split * by_class.len());
    for (class_index, (label, mut members)) in by_class.into_iter().enumerate() {
        if members.len() < split {
            return Err(Error::InsufficientClass {
                label: label.to_string(),
                available: members.len(),
                requested: split,
            });
        }
        members.shuffle(&mut seed::rng(&[seed, class_index as u64]));
        keep.extend_from_slice(&members[..split]);
    }
    keep.sort_unstable();
    d.select(format!("{}@{split}", d.name()), &keep)
}
