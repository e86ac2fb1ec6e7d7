//! Exhaustive grid search over GBDT hyperparameters.
//!
//! Every combination is cross-validated on one shared fold assignment. The
//! winner has the highest mean accuracy, then the highest mean AUC, then the
//! lexicographically smallest hyperparameter tuple.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::io::fmt_cell;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::evaluation::{cross_validate_with_folds, stratified_kfold, EvalOptions};
use crate::learners::BinaryLearnerSpec;
use crate::resampling::SmoteSpec;

fn d_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub num_leaves: Vec<usize>,
    pub min_child_samples: Vec<usize>,
    pub feature_fraction: Vec<f64>,
    pub row_fraction: Vec<f64>,
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

/// One grid cell, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub num_leaves: usize,
    pub min_child_samples: usize,
    pub feature_fraction: f64,
    pub row_fraction: f64,
}

impl HyperParams {
    fn lex_cmp(&self, o: &Self) -> Ordering {
        self.n_estimators
            .cmp(&o.n_estimators)
            .then(self.max_depth.cmp(&o.max_depth))
            .then(self.learning_rate.total_cmp(&o.learning_rate))
            .then(self.num_leaves.cmp(&o.num_leaves))
            .then(self.min_child_samples.cmp(&o.min_child_samples))
            .then(self.feature_fraction.total_cmp(&o.feature_fraction))
            .then(self.row_fraction.total_cmp(&o.row_fraction))
    }

    pub fn apply(&self, base: &BinaryLearnerSpec) -> BinaryLearnerSpec {
        BinaryLearnerSpec {
            n_estimators: self.n_estimators,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            num_leaves: self.num_leaves,
            min_child_samples: self.min_child_samples,
            feature_fraction: self.feature_fraction,
            row_fraction: self.row_fraction,
            ..base.clone()
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let lens = [
            ("n_estimators", self.n_estimators.len()),
            ("max_depth", self.max_depth.len()),
            ("learning_rate", self.learning_rate.len()),
            ("num_leaves", self.num_leaves.len()),
            ("min_child_samples", self.min_child_samples.len()),
            ("feature_fraction", self.feature_fraction.len()),
            ("row_fraction", self.row_fraction.len()),
        ];
        if let Some((name, _)) = lens.iter().find(|(_, l)| *l == 0) {
            return Err(Error::Config(format!("grid list `{name}` is empty")));
        }
        if self.k < 2 {
            return Err(Error::Config(format!("grid k must be >= 2, got {}", self.k)));
        }
        Ok(())
    }

    pub fn cardinality(&self) -> usize {
        self.n_estimators.len()
            * self.max_depth.len()
            * self.learning_rate.len()
            * self.num_leaves.len()
            * self.min_child_samples.len()
            * self.feature_fraction.len()
            * self.row_fraction.len()
    }

    /// All combinations, first list varying slowest.
    pub fn combinations(&self) -> Vec<HyperParams> {
        let mut out = Vec::with_capacity(self.cardinality());
        for &n_estimators in &self.n_estimators {
            for &max_depth in &self.max_depth {
                for &learning_rate in &self.learning_rate {
                    for &num_leaves in &self.num_leaves {
                        for &min_child_samples in &self.min_child_samples {
                            for &feature_fraction in &self.feature_fraction {
                                for &row_fraction in &self.row_fraction {
                                    out.push(HyperParams {
                                        n_estimators,
                                        max_depth,
                                        learning_rate,
                                        num_leaves,
                                        min_child_samples,
                                        feature_fraction,
                                        row_fraction,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: HyperParams,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
    /// `None` on success, otherwise the fitting error.
    pub error: Option<String>,
}

impl Trial {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// In enumeration order.
    pub trials: Vec<Trial>,
    /// Index into `trials` of the winner.
    pub best: usize,
    pub best_spec: BinaryLearnerSpec,
    pub folds: Vec<Vec<usize>>,
}

fn rank(a: &Trial, b: &Trial) -> Ordering {
    let auc = |t: &Trial| {
        if t.mean_auc.is_nan() {
            f64::NEG_INFINITY
        } else {
            t.mean_auc
        }
    };
    b.mean_accuracy
        .total_cmp(&a.mean_accuracy)
        .then(auc(b).total_cmp(&auc(a)))
        .then(a.params.lex_cmp(&b.params))
}

pub fn grid_search(
    data: &LabeledDataset,
    grid: &GridSpec,
    base: &BinaryLearnerSpec,
    smote: Option<&SmoteSpec>,
) -> Result<GridResult> {
    grid.validate()?;
    let folds = stratified_kfold(data.labels(), grid.k, grid.seed)?;
    let opts = EvalOptions::default();
    let trials: Vec<Trial> = grid
        .combinations()
        .into_par_iter()
        .enumerate()
        .map(|(index, params)| {
            let spec = params.apply(base);
            match cross_validate_with_folds(data, &spec, smote, &folds, grid.seed, &opts) {
                Ok(r) => Trial {
                    index,
                    params,
                    mean_accuracy: r.mean_accuracy,
                    std_accuracy: r.std_accuracy,
                    mean_auc: r.mean_auc,
                    std_auc: r.std_auc,
                    error: None,
                },
                Err(e) => {
                    log::warn!("trial {index} failed: {e}");
                    Trial {
                        index,
                        params,
                        mean_accuracy: f64::NAN,
                        std_accuracy: f64::NAN,
                        mean_auc: f64::NAN,
                        std_auc: f64::NAN,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    let best = trials
        .iter()
        .filter(|t| t.ok())
        .min_by(|a, b| rank(a, b))
        .ok_or_else(|| Error::Fit("every grid trial failed".into()))?
        .index;
    Ok(GridResult {
        best_spec: trials[best].params.apply(base),
        trials,
        best,
        folds,
    })
}

impl GridResult {
    /// Trial table as CSV, one row per combination in enumeration order.
    pub fn write_csv<W: Write>(&self, out: W, comment: Option<&str>) -> Result<()> {
        let mut out = out;
        if let Some(c) = comment {
            writeln!(out, "# {c}").map_err(|e| Error::io("<trial table>", e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "trial",
            "n_estimators",
            "max_depth",
            "learning_rate",
            "num_leaves",
            "min_child_samples",
            "feature_fraction",
            "row_fraction",
            "mean_accuracy",
            "std_accuracy",
            "mean_auc",
            "std_auc",
            "status",
            "selected",
        ])?;
        for t in &self.trials {
            let p = &t.params;
            w.write_record([
                t.index.to_string(),
                p.n_estimators.to_string(),
                p.max_depth.to_string(),
                fmt_cell(p.learning_rate),
                p.num_leaves.to_string(),
                p.min_child_samples.to_string(),
                fmt_cell(p.feature_fraction),
                fmt_cell(p.row_fraction),
                fmt_cell(t.mean_accuracy),
                fmt_cell(t.std_accuracy),
                fmt_cell(t.mean_auc),
                fmt_cell(t.std_auc),
                t.error.as_ref().map_or("ok".into(), |e| format!("failed: {e}")),
                (t.index == self.best).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<trial table>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f), comment)
    }
}
