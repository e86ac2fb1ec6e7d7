use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};

pub const PROFILE_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub class: usize,
    pub correct: Vec<usize>,
    /// Empty when the whole dataset has no misclassified rows.
    pub incorrect: Vec<usize>,
    /// Rows whose feature value is missing and so fall in no bin.
    pub correct_missing: usize,
    pub incorrect_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    pub feature: String,
    /// `PROFILE_BINS + 1` equal-width edges over the pooled observed range.
    pub edges: Vec<f64>,
    pub classes: Vec<ClassProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn bin_of(v: f64, lo: f64, width: f64) -> usize {
    if width <= 0.0 {
        return 0;
    }
    (((v - lo) / width).floor() as usize).min(PROFILE_BINS - 1)
}

/// Histograms of each named feature for correctly and incorrectly classified
/// rows, split by true class.
pub fn misclassification_profile(
    features: &FeatureMatrix,
    y_true: &[usize],
    y_pred: &[usize],
    k: usize,
    names: &[String],
) -> Result<Vec<FeatureProfile>> {
    if y_true.len() != features.n_rows() || y_pred.len() != features.n_rows() {
        return Err(Error::Data("profile inputs differ in row count".into()));
    }
    let any_wrong = y_true.iter().zip(y_pred).any(|(a, b)| a != b);
    names
        .iter()
        .map(|name| {
            let j = features
                .column_index(name)
                .ok_or_else(|| Error::Config(format!("unknown profile feature `{name}`")))?;
            let col = features.values().column(j);
            let (lo, hi) = col
                .iter()
                .filter(|v| !v.is_nan())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
            let width = (hi - lo) / PROFILE_BINS as f64;
            let mut edges: Vec<f64> = (0..=PROFILE_BINS).map(|b| lo + width * b as f64).collect();
            edges[PROFILE_BINS] = hi;
            let mut classes: Vec<ClassProfile> = (0..k)
                .map(|class| ClassProfile {
                    class,
                    correct: vec![0; PROFILE_BINS],
                    incorrect: if any_wrong { vec![0; PROFILE_BINS] } else { Vec::new() },
                    correct_missing: 0,
                    incorrect_missing: 0,
                })
                .collect();
            for (i, &v) in col.iter().enumerate() {
                let cp = &mut classes[y_true[i]];
                let ok = y_true[i] == y_pred[i];
                match (v.is_nan(), ok) {
                    (true, true) => cp.correct_missing += 1,
                    (true, false) => cp.incorrect_missing += 1,
                    (false, true) => cp.correct[bin_of(v, lo, width)] += 1,
                    (false, false) => cp.incorrect[bin_of(v, lo, width)] += 1,
                }
            }
            Ok(FeatureProfile {
                feature: name.clone(),
                edges,
                classes,
                note: (!any_wrong).then(|| "no misclassified rows".to_string()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;
    use proptest::prelude::*;

    fn fm(vals: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(
            (0..vals.len()).map(|i| i.to_string()).collect(),
            vec!["geo:nightlight".into()],
            DenseMatrix::new(vals.len(), 1, vals.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn no_errors_gives_empty_incorrect() {
        let p = misclassification_profile(
            &fm(&[1.0, 2.0, 3.0]),
            &[0, 1, 1],
            &[0, 1, 1],
            2,
            &["geo:nightlight".into()],
        )
        .unwrap();
        assert!(p[0].classes.iter().all(|c| c.incorrect.is_empty()));
        assert_eq!(p[0].classes[1].correct.iter().sum::<usize>(), 2);
        assert!(p[0].note.is_some());
    }

    #[test]
    fn unknown_feature() {
        assert!(misclassification_profile(&fm(&[1.0]), &[0], &[0], 1, &["geo:nope".into()]).is_err());
    }

    proptest! {
        #[test]
        fn counts_and_range(rows in prop::collection::vec((-50.0f64..50.0, 0usize..3, 0usize..3), 1..150)) {
            let vals: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let t: Vec<usize> = rows.iter().map(|r| r.1).collect();
            let p: Vec<usize> = rows.iter().map(|r| r.2).collect();
            let prof = &misclassification_profile(&fm(&vals), &t, &p, 3, &["geo:nightlight".into()]).unwrap()[0];
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(prof.edges[0], lo);
            prop_assert_eq!(prof.edges[PROFILE_BINS], hi);
            for c in &prof.classes {
                let right = (0..t.len()).filter(|&i| t[i] == c.class && p[i] == t[i]).count();
                let wrong = (0..t.len()).filter(|&i| t[i] == c.class && p[i] != t[i]).count();
                prop_assert_eq!(c.correct.iter().sum::<usize>(), right);
                prop_assert_eq!(c.incorrect.iter().sum::<usize>(), wrong);
            }
        }
    }
}
