//! Binary probabilistic base learners.
//!
//! Three families share one spec: L2 logistic regression, random forest, and
//! histogram GBDT. GBDT grows trees either level-wise (classic gradient
//! boosting) or leaf-wise (LightGBM-style); that growth policy plus histogram
//! binning is what separates the two boosting configurations.

mod forest;
mod gbdt;
pub mod histogram;
mod logistic;
mod tree;


use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub use forest::{fit_random_forest, RandomForest};
pub use gbdt::{fit_gbdt, log_loss, Gbdt};
pub use logistic::{
    fit_logistic, gradient as logistic_gradient, objective as logistic_objective, LogisticModel, LogisticParams,
};
pub use tree::{fit_tree, leaf_value, split_gain, DecisionTree, FeatureSampling, Node, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Logistic,
    RandomForest,
    Gbdt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// Expand every frontier node, depth by depth.
    LevelWise,
    /// Repeatedly expand the single highest-gain leaf.
    LeafWise,
}

fn d_n_estimators() -> usize {
    100
}
fn d_max_depth() -> usize {
    6
}
fn d_learning_rate() -> f64 {
    0.1
}
fn d_num_leaves() -> usize {
    31
}
fn d_min_child() -> usize {
    20
}
fn d_one() -> f64 {
    1.0
}
fn d_l2() -> f64 {
    1e-3
}

fn d_growth() -> Growth {
    Growth::LeafWise
}
fn d_true() -> bool {
    true
}
fn d_max_iter() -> usize {
    100
}
fn d_tol() -> f64 {
    1e-6
}

/// Hyperparameters for one binary learner. Fields irrelevant to `kind` are
/// ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryLearnerSpec {
    pub kind: LearnerKind,
    #[serde(default = "d_n_estimators")]
    pub n_estimators: usize,
    #[serde(default = "d_max_depth")]
    pub max_depth: usize,
    #[serde(default = "d_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "d_num_leaves")]
    pub num_leaves: usize,
    #[serde(default = "d_min_child")]
    pub min_child_samples: usize,
    #[serde(default = "d_one")]
    pub feature_fraction: f64,
    #[serde(default = "d_one")]
    pub row_fraction: f64,
    /// Logistic regression penalty on standardised coefficients, added to the
    /// mean log-loss.
    #[serde(default = "d_l2")]
    pub l2_penalty: f64,
    /// GBDT leaf-value regulariser.
    #[serde(default = "d_one")]
    pub lambda: f64,
    #[serde(default = "d_growth")]
    pub growth: Growth,
    /// Random forest: sample rows with replacement.
    #[serde(default = "d_true")]
    pub bootstrap: bool,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

impl BinaryLearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        let mut s: Self = serde_json::from_value(serde_json::json!({ "kind": kind })).expect("defaults are complete");
        if kind == LearnerKind::RandomForest {
            s.growth = Growth::LevelWise;
            s.max_depth = 12;
            s.num_leaves = 4096;
            s.min_child_samples = 2;
            s.feature_fraction = 0.5;
        }
        s
    }

    pub fn logistic() -> Self {
        Self::new(LearnerKind::Logistic)
    }

    pub fn random_forest() -> Self {
        Self::new(LearnerKind::RandomForest)
    }

    /// Classic gradient boosting: level-wise trees.
    pub fn gbdt_level_wise() -> Self {
        let mut s = Self::new(LearnerKind::Gbdt);
        s.growth = Growth::LevelWise;
        s.max_depth = 3;
        s.num_leaves = 8;
        s
    }

    /// LightGBM-style boosting: leaf-wise trees.
    pub fn gbdt_leaf_wise() -> Self {
        Self::new(LearnerKind::Gbdt)
    }

    /// Short stable name used in report file names.
    pub fn label(&self) -> String {
        match (self.kind, self.growth) {
            (LearnerKind::Logistic, _) => "logistic".into(),
            (LearnerKind::RandomForest, _) => "random_forest".into(),
            (LearnerKind::Gbdt, Growth::LevelWise) => "gbdt_level_wise".into(),
            (LearnerKind::Gbdt, Growth::LeafWise) => "gbdt_leaf_wise".into(),
        }
    }

    /// Checks these hyperparameters for use in a pipeline. The lower-level `fit_*`
    /// functions also accept the degenerate `n_estimators = 0` and
    /// `learning_rate = 0`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("n_estimators", self.n_estimators),
            ("max_depth", self.max_depth),
            ("num_leaves", self.num_leaves),
            ("min_child_samples", self.min_child_samples),
            ("max_iter", self.max_iter),
        ] {
            if v < 1 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        for (name, v) in [
            ("feature_fraction", self.feature_fraction),
            ("row_fraction", self.row_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must be in (0, 1], got {v}"));
            }
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.l2_penalty >= 0.0) || !(self.lambda >= 0.0) {
            return bad("penalties must be non-negative".into());
        }
        Ok(())
    }
}

/// A fitted binary learner returning `P(y = 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinaryModel {
    Logistic(LogisticModel),
    RandomForest(RandomForest),
    Gbdt(Gbdt),
}

impl BinaryModel {
    pub fn predict_proba_row(&self, x: &[f64]) -> f64 {
        match self {
            BinaryModel::Logistic(m) => m.predict_proba_row(x),
            BinaryModel::RandomForest(m) => m.predict_proba_row(x),
            BinaryModel::Gbdt(m) => m.predict_proba_row(x),
        }
    }

    pub fn predict_proba(&self, x: &DenseMatrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_proba_row(r)).collect()
    }

    /// Total split gain per feature index; `None` for non-tree models.
    pub fn feature_gain(&self, n_features: usize) -> Option<Vec<f64>> {
        match self {
            BinaryModel::Logistic(_) => None,
            BinaryModel::RandomForest(m) => Some(m.feature_gain(n_features)),
            BinaryModel::Gbdt(m) => Some(m.feature_gain(n_features)),
        }
    }
}

/// Fits the learner described by `spec` on finite `x` and labels in {0, 1}.
pub fn fit_binary(x: &DenseMatrix, y: &[u8], spec: &BinaryLearnerSpec, seed: u64) -> Result<BinaryModel> {
    if x.rows() != y.len() {
        return Err(Error::Fit(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    Ok(match spec.kind {
        LearnerKind::Logistic => BinaryModel::Logistic(fit_logistic(
            x,
            y,
            &LogisticParams {
                l2_penalty: spec.l2_penalty,
                max_iter: spec.max_iter,
                tol: spec.tol,
            },
        )?),
        LearnerKind::RandomForest => BinaryModel::RandomForest(fit_random_forest(x, y, spec, seed)?),
        LearnerKind::Gbdt => BinaryModel::Gbdt(fit_gbdt(x, y, spec, seed)?),
    })
}

/// Maps per-index gains onto feature names.
pub fn feature_gain(model: &BinaryModel, names: &[String]) -> Option<BTreeMap<String, f64>> {
    let gains = model.feature_gain(names.len())?;
    Some(names.iter().cloned().zip(gains).collect())
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn check_binary(y: &[u8]) -> Result<()> {
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Fit("binary labels must be 0 or 1".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Fit(format!(
            "single-class target ({} rows, {pos} positive)",
            y.len()
        )));
    }
    Ok(())
}
