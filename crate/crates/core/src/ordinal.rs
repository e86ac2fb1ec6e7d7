//! Ordinal classification by threshold decomposition.
//!
//! A K-class problem becomes K-1 binary problems; model k estimates
//! `c_k = P(y > k)`. Class probabilities are recovered by a front-to-back
//! clamp `c_k <- min(c_{k-1}, c_k)` followed by differencing.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, LabeledDataset, OrdinalBinning};
use crate::error::{Error, Result};
use crate::learners::{fit_binary, BinaryLearnerSpec, BinaryModel};
use crate::matrix::DenseMatrix;
use crate::resampling::{smote, SmoteSpec};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// Sequential min-clamp of cumulative probabilities, then differencing.
    SequentialMin,
}

/// Column names a model was fitted on, with the training medians used to fill
/// missing cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<String>,
    pub medians: Vec<f64>,
}

impl FeatureSchema {
    /// Median of the non-missing values of each column (0 for all-missing).
    pub fn fit(features: &FeatureMatrix) -> Self {
        let v = features.values();
        let medians = (0..v.cols())
            .map(|j| {
                let mut col: Vec<f64> = v.column(j).into_iter().filter(|x| !x.is_nan()).collect();
                median(&mut col)
            })
            .collect();
        FeatureSchema {
            columns: features.column_names().to_vec(),
            medians,
        }
    }

    /// Reorders `features` into schema order and fills missing cells.
    pub fn apply(&self, features: &FeatureMatrix) -> Result<DenseMatrix> {
        let have: BTreeSet<&str> = features.column_names().iter().map(String::as_str).collect();
        let want: BTreeSet<&str> = self.columns.iter().map(String::as_str).collect();
        if have != want {
            return Err(Error::SchemaMismatch {
                missing: want.difference(&have).map(|s| s.to_string()).collect(),
                extra: have.difference(&want).map(|s| s.to_string()).collect(),
            });
        }
        let idx: Vec<usize> = self
            .columns
            .iter()
            .map(|c| features.column_index(c).expect("checked above"))
            .collect();
        let src = features.values();
        let mut out = DenseMatrix::zeros(src.rows(), idx.len());
        for i in 0..src.rows() {
            let row = src.row(i);
            for (dst, (&j, &m)) in out.row_mut(i).iter_mut().zip(idx.iter().zip(&self.medians)) {
                let v = row[j];
                *dst = if v.is_nan() { m } else { v };
            }
        }
        Ok(out)
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrdinalModel {
    pub classes: usize,
    pub schema: FeatureSchema,
    pub binning: OrdinalBinning,
    pub learner: BinaryLearnerSpec,
    pub smote: Option<SmoteSpec>,
    pub reconstruction: Reconstruction,
    /// Model `k` scores `P(y > k)`.
    pub thresholds: Vec<BinaryModel>,
}

/// In-place sequential clamp `c_k <- min(c_{k-1}, c_k)` with `c_{-1} = 1`.
/// Values are first clipped to [0, 1].
pub fn monotonize(c: &mut [f64]) {
    let mut prev = 1.0f64;
    for v in c.iter_mut() {
        let x = v.clamp(0.0, 1.0).min(prev);
        *v = x;
        prev = x;
    }
}

/// Class distribution from K-1 cumulative probabilities.
pub fn reconstruct(cumulative: &[f64]) -> Vec<f64> {
    let mut c = cumulative.to_vec();
    monotonize(&mut c);
    let k = c.len() + 1;
    let mut p = Vec::with_capacity(k);
    let mut prev = 1.0;
    for &ck in &c {
        p.push(prev - ck);
        prev = ck;
    }
    p.push(prev);
    p
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn threshold_seed(seed: u64, learner_seed: u64, k: usize) -> u64 {
    seed::derive(seed::derive(seed, learner_seed), k as u64)
}

/// Fit one binary model per threshold. Thresholds are fitted in parallel, each
/// with a seed derived from `(seed, k)`, so the result does not depend on the
/// thread count.
pub fn fit_ordinal(
    data: &LabeledDataset,
    learner: &BinaryLearnerSpec,
    resampler: Option<&SmoteSpec>,
    seed: u64,
) -> Result<OrdinalModel> {
    let k = data.num_classes();
    if k < 2 {
        return Err(Error::Config(format!(
            "ordinal model needs at least 2 classes, got {k}"
        )));
    }
    let counts = data.class_counts();
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!("class {c} has no rows (counts {counts:?})")));
    }
    let schema = FeatureSchema::fit(data.features());
    let x = schema.apply(data.features())?;
    let labels = data.labels();
    let thresholds = (0..k - 1)
        .into_par_iter()
        .map(|t| {
            let y: Vec<u8> = labels.iter().map(|&l| u8::from(l > t)).collect();
            let s = threshold_seed(seed, learner.seed, t);
            let fit = || -> Result<BinaryModel> {
                crate::learners::check_binary(&y)?;
                match resampler {
                    Some(spec) => {
                        let spec = SmoteSpec {
                            seed: seed::derive(s, spec.seed),
                            ..spec.clone()
                        };
                        let r = smote(&x, &y, &spec)?;
                        fit_binary(&r.x, &r.y, learner, s)
                    }
                    None => fit_binary(&x, &y, learner, s),
                }
            };
            fit().map_err(|e| Error::Threshold {
                threshold: t,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrdinalModel {
        classes: k,
        schema,
        binning: data.binning().clone(),
        learner: learner.clone(),
        smote: resampler.cloned(),
        reconstruction: Reconstruction::SequentialMin,
        thresholds,
    })
}

impl OrdinalModel {
    /// Raw (unrepaired) cumulative scores, one K-1 vector per row.
    pub fn cumulative(&self, features: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        let x = self.schema.apply(features)?;
        Ok(x.iter_rows()
            .map(|r| self.thresholds.iter().map(|m| m.predict_proba_row(r)).collect())
            .collect())
    }

    pub fn predict_proba(&self, features: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        Ok(self.cumulative(features)?.iter().map(|c| reconstruct(c)).collect())
    }

    pub fn predict_class(&self, features: &FeatureMatrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(features)?.iter().map(|p| argmax(p)).collect())
    }

    /// Split gain per feature summed over all threshold models (tree learners only).
    pub fn feature_gain(&self) -> Option<BTreeMap<String, f64>> {
        let n = self.schema.columns.len();
        let mut total = vec![0.0; n];
        for m in &self.thresholds {
            for (t, g) in total.iter_mut().zip(m.feature_gain(n)?) {
                *t += g;
            }
        }
        Some(self.schema.columns.iter().cloned().zip(total).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: OrdinalModel = serde_json::from_str(s)?;
        if m.thresholds.len() + 1 != m.classes || m.binning.num_classes() != m.classes {
            return Err(Error::Format(format!(
                "model has {} classes but {} threshold models and {} bins",
                m.classes,
                m.thresholds.len(),
                m.binning.num_classes()
            )));
        }
        if m.schema.columns.len() != m.schema.medians.len() {
            return Err(Error::Format("schema columns and medians differ in length".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
