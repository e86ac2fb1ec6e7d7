//! Cross-validation and metrics.

mod confusion;
mod cv;
mod metrics;
mod profile;

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::learners::BinaryLearnerSpec;
use crate::ordinal::fit_ordinal;
use crate::resampling::SmoteSpec;
use crate::seed;

pub use confusion::{confusion_matrix_normalized, ConfusionMatrix};
pub use cv::{stratified_kfold, training_rows};
pub use metrics::{accuracy, mean_std, midranks, roc_auc_binary, roc_auc_macro_ovr, MacroAuc};
pub use profile::{misclassification_profile, ClassProfile, FeatureProfile, PROFILE_BINS};

pub const TOP_IMPORTANCES: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestFold {
    pub fold: usize,
    pub accuracy: f64,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub learner: String,
    pub k: usize,
    pub n_rows: usize,
    pub classes: Vec<String>,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracy: Vec<f64>,
    /// Macro one-vs-rest AUC per fold; `None` when a fold holds fewer than two classes.
    pub fold_auc: Vec<Option<f64>>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub best_fold: BestFold,
    /// Accuracy of validation predictions pooled across folds.
    pub pooled_accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Gain share, normalised to sum to 1, highest first. Empty for linear learners.
    pub importances: Vec<(String, f64)>,
    pub profiles: Vec<FeatureProfile>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Features to histogram for correct versus misclassified rows.
    pub profile_features: Vec<String>,
}

struct FoldResult {
    rows: Vec<usize>,
    proba: Vec<Vec<f64>>,
    pred: Vec<usize>,
    gain: Option<BTreeMap<String, f64>>,
}

/// Stratified k-fold evaluation of an ordinal model.
pub fn cross_validate(
    data: &LabeledDataset,
    learner: &BinaryLearnerSpec,
    smote: Option<&SmoteSpec>,
    k: usize,
    seed: u64,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let folds = stratified_kfold(data.labels(), k, seed)?;
    cross_validate_with_folds(data, learner, smote, &folds, seed, options)
}

/// As [`cross_validate`] with a caller-supplied fold assignment.
pub fn cross_validate_with_folds(
    data: &LabeledDataset,
    learner: &BinaryLearnerSpec,
    smote: Option<&SmoteSpec>,
    folds: &[Vec<usize>],
    seed: u64,
    options: &EvalOptions,
) -> Result<EvalReport> {
    learner.validate()?;
    if let Some(s) = smote {
        s.validate()?;
    }
    let n = data.len();
    let k_classes = data.num_classes();
    let results = folds
        .par_iter()
        .enumerate()
        .map(|(f, valid)| {
            let run = || -> Result<FoldResult> {
                if valid.is_empty() {
                    return Err(Error::Data("empty validation fold".into()));
                }
                let train = data.subset(&training_rows(n, valid));
                let model = fit_ordinal(&train, learner, smote, seed::derive(seed, f as u64))?;
                let held = data.features().select_rows(valid);
                let proba = model.predict_proba(&held)?;
                let pred = proba.iter().map(|p| crate::ordinal::argmax(p)).collect();
                Ok(FoldResult {
                    rows: valid.clone(),
                    proba,
                    pred,
                    gain: model.feature_gain(),
                })
            };
            run().map_err(|e| Error::Fold {
                fold: f,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    let mut pooled = vec![usize::MAX; n];
    let mut fold_accuracy = Vec::new();
    let mut fold_auc = Vec::new();
    for (f, r) in results.iter().enumerate() {
        let truth: Vec<usize> = r.rows.iter().map(|&i| data.labels()[i]).collect();
        fold_accuracy.push(accuracy(&truth, &r.pred)?);
        let auc = match roc_auc_macro_ovr(&truth, &r.proba, k_classes) {
            Ok(m) => {
                let absent: Vec<usize> = (0..k_classes).filter(|&c| m.per_class[c].is_none()).collect();
                if !absent.is_empty() {
                    warnings.push(format!("fold {f}: classes {absent:?} absent, excluded from AUC"));
                }
                Some(m.value)
            }
            Err(e) => {
                warnings.push(format!("fold {f}: AUC undefined ({e})"));
                None
            }
        };
        fold_auc.push(auc);
        for (&i, &p) in r.rows.iter().zip(&r.pred) {
            if pooled[i] != usize::MAX {
                return Err(Error::Config(format!("row {i} appears in more than one fold")));
            }
            pooled[i] = p;
        }
    }
    if let Some(i) = pooled.iter().position(|&p| p == usize::MAX) {
        return Err(Error::Config(format!("row {i} is in no validation fold")));
    }
    for w in &warnings {
        warn!("{w}");
    }

    let (mean_accuracy, std_accuracy) = mean_std(&fold_accuracy);
    let aucs: Vec<f64> = fold_auc.iter().flatten().copied().collect();
    let (mean_auc, std_auc) = mean_std(&aucs);
    let mut best = 0;
    for f in 1..folds.len() {
        let key = |i: usize| (fold_accuracy[i], fold_auc[i].unwrap_or(f64::NEG_INFINITY));
        if key(f) > key(best) {
            best = f;
        }
    }

    let pooled_accuracy = accuracy(data.labels(), &pooled)?;
    let confusion = confusion_matrix_normalized(data.labels(), &pooled, k_classes)?;
    let profiles = misclassification_profile(
        data.features(),
        data.labels(),
        &pooled,
        k_classes,
        &options.profile_features,
    )?;

    Ok(EvalReport {
        learner: learner.label(),
        k: folds.len(),
        n_rows: n,
        classes: data.binning().class_labels().to_vec(),
        fold_sizes: folds.iter().map(Vec::len).collect(),
        best_fold: BestFold {
            fold: best,
            accuracy: fold_accuracy[best],
            auc: fold_auc[best],
        },
        fold_accuracy,
        fold_auc,
        mean_accuracy,
        std_accuracy,
        mean_auc,
        std_auc,
        pooled_accuracy,
        confusion,
        importances: top_importances(results.iter().map(|r| r.gain.as_ref())),
        profiles,
        warnings,
    })
}

/// Sums gains over folds, normalises to 1 and keeps the largest entries
/// (ties by name).
fn top_importances<'a>(gains: impl Iterator<Item = Option<&'a BTreeMap<String, f64>>>) -> Vec<(String, f64)> {
    let mut total: BTreeMap<String, f64> = BTreeMap::new();
    for g in gains {
        let Some(g) = g else { return Vec::new() };
        for (name, v) in g {
            *total.entry(name.clone()).or_default() += v;
        }
    }
    let sum: f64 = total.values().sum();
    if sum <= 0.0 {
        return Vec::new();
    }
    let mut v: Vec<(String, f64)> = total.into_iter().map(|(n, g)| (n, g / sum)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(TOP_IMPORTANCES);
    v
}
