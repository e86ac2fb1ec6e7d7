use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::histogram::BinnedMatrix;
use super::tree::{fit_tree, DecisionTree, FeatureSampling, TreeParams};
use super::{check_binary, sigmoid, BinaryLearnerSpec};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::seed;

/// Log-loss gradient boosted trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    /// Logit of the training positive rate.
    pub base_score: f64,
    /// Leaf values already include the learning rate.
    pub trees: Vec<DecisionTree>,
    /// Mean training log-loss before the first round and after each round.
    #[serde(skip)]
    pub training_loss: Vec<f64>,
}

impl Gbdt {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }

    pub fn feature_gain(&self, n_features: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_features];
        for t in &self.trees {
            t.accumulate_gain(&mut out);
        }
        out
    }
}

/// Mean log-loss of raw scores `f` against labels `y`.
pub fn log_loss(f: &[f64], y: &[u8]) -> f64 {
    // log(1 + e^f) - y f, computed stably
    let s: f64 = f
        .iter()
        .zip(y)
        .map(|(&f, &y)| f.max(0.0) + (-f.abs()).exp().ln_1p() - f64::from(y) * f)
        .sum();
    s / f.len() as f64
}

pub fn fit_gbdt(x: &DenseMatrix, y: &[u8], spec: &BinaryLearnerSpec, seed: u64) -> Result<Gbdt> {
    check_binary(y)?;
    let n = x.rows();
    let pos = y.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
    let base_score = (pos / (1.0 - pos)).ln();
    let mut model = Gbdt {
        base_score,
        trees: Vec::new(),
        training_loss: Vec::new(),
    };
    let mut f = vec![base_score; n];
    model.training_loss.push(log_loss(&f, y));
    if spec.learning_rate == 0.0 || spec.n_estimators == 0 {
        return Ok(model);
    }

    let data = BinnedMatrix::fit(x);
    let params = TreeParams {
        growth: spec.growth,
        max_depth: spec.max_depth,
        num_leaves: spec.num_leaves,
        min_child_samples: spec.min_child_samples,
        lambda: spec.lambda,
        feature_fraction: spec.feature_fraction,
        feature_sampling: FeatureSampling::PerTree,
    };
    let sample_size = ((spec.row_fraction * n as f64).round() as usize).clamp(1, n);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for round in 0..spec.n_estimators {
        for i in 0..n {
            let p = sigmoid(f[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = (p * (1.0 - p)).max(1e-16);
        }
        let mut rng = seed::rng(seed::derive(seed, round as u64));
        let rows: Vec<usize> = if sample_size < n {
            let mut r = rand::seq::index::sample(&mut rng, n, sample_size).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let mut tree = fit_tree(&data, &rows, &grad, &hess, &params, &mut rng);
        tree.scale_leaves(spec.learning_rate);
        f.par_iter_mut()
            .enumerate()
            .for_each(|(i, fi)| *fi += tree.predict(x.row(i)));
        let loss = log_loss(&f, y);
        if !loss.is_finite() {
            return Err(Error::Fit(format!(
                "training loss became {loss} at boosting round {round}"
            )));
        }
        model.training_loss.push(loss);
        model.trees.push(tree);
    }
    Ok(model)
}
