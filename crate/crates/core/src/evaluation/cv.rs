use log::warn;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

/// Split `0..labels.len()` into `k` stratified validation folds.
///
/// Each class is shuffled with its own derived seed and dealt round-robin; the
/// dealing position carries over from one class to the next so fold sizes also
/// differ by at most one. Indices inside a fold are ascending.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::Config(format!("k = {k} exceeds {} rows", labels.len())));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut folds = vec![Vec::new(); k];
    let mut at = 0;
    for class in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            warn!("class {class} has {} rows, fewer than k = {k}", idx.len());
        }
        idx.shuffle(&mut seed::rng(seed::derive(seed, class as u64)));
        for i in idx {
            folds[at].push(i);
            at = (at + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Complement of a validation fold.
pub fn training_rows(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut held = vec![false; n];
    for &i in fold {
        held[i] = true;
    }
    (0..n).filter(|&i| !held[i]).collect()
}
