use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::histogram::BinnedMatrix;
use super::tree::{fit_tree, DecisionTree, FeatureSampling, TreeParams};
use super::{check_binary, BinaryLearnerSpec};
use crate::error::Result;
use crate::matrix::DenseMatrix;
use crate::seed;

/// Bagged classification trees; the predicted probability is the mean leaf
/// class fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    /// Out-of-bag accuracy at 0.5, when any row was left out of some tree.
    pub oob_accuracy: Option<f64>,
}

impl RandomForest {
    pub fn predict_proba_row(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        let s: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        (s / self.trees.len() as f64).clamp(0.0, 1.0)
    }

    pub fn feature_gain(&self, n_features: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_features];
        for t in &self.trees {
            t.accumulate_gain(&mut out);
        }
        out
    }
}

pub fn fit_random_forest(x: &DenseMatrix, y: &[u8], spec: &BinaryLearnerSpec, seed: u64) -> Result<RandomForest> {
    check_binary(y)?;
    let n = x.rows();
    let data = BinnedMatrix::fit(x);
    let grad: Vec<f64> = y.iter().map(|&v| -f64::from(v)).collect();
    let hess = vec![1.0; n];
    let params = TreeParams {
        growth: spec.growth,
        max_depth: spec.max_depth,
        num_leaves: spec.num_leaves,
        min_child_samples: spec.min_child_samples,
        lambda: 0.0,
        feature_fraction: spec.feature_fraction,
        feature_sampling: FeatureSampling::PerSplit,
    };
    let sample_size = ((spec.row_fraction * n as f64).round() as usize).clamp(1, n);

    let fitted: Vec<(DecisionTree, Vec<bool>)> = (0..spec.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(seed, t as u64));
            let rows: Vec<usize> = if spec.bootstrap {
                (0..sample_size).map(|_| rng.random_range(0..n)).collect()
            } else if sample_size < n {
                let mut r: Vec<usize> = rand::seq::index::sample(&mut rng, n, sample_size).into_vec();
                r.sort_unstable();
                r
            } else {
                (0..n).collect()
            };
            let mut in_bag = vec![false; n];
            for &r in &rows {
                in_bag[r] = true;
            }
            (fit_tree(&data, &rows, &grad, &hess, &params, &mut rng), in_bag)
        })
        .collect();

    let mut oob_sum = vec![0.0; n];
    let mut oob_n = vec![0usize; n];
    for (tree, in_bag) in &fitted {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            oob_sum[i] += tree.predict(x.row(i));
            oob_n[i] += 1;
        }
    }
    let scored: Vec<usize> = (0..n).filter(|&i| oob_n[i] > 0).collect();
    let oob_accuracy = (!scored.is_empty()).then(|| {
        let hits = scored
            .iter()
            .filter(|&&i| (oob_sum[i] / oob_n[i] as f64 > 0.5) == (y[i] == 1))
            .count();
        hits as f64 / scored.len() as f64
    });
    Ok(RandomForest {
        trees: fitted.into_iter().map(|(t, _)| t).collect(),
        oob_accuracy,
    })
}
