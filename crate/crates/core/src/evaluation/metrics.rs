use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(Error::Data(format!(
            "accuracy needs equal non-empty inputs, got {} and {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// 1-based ranks with ties replaced by their mean rank.
pub fn midranks(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Probability that a random positive outscores a random negative (ties count
/// one half), via the Mann-Whitney rank sum. `None` when a class is absent.
pub fn roc_auc_binary(y_true: &[bool], scores: &[f64]) -> Option<f64> {
    assert_eq!(y_true.len(), scores.len(), "labels and scores differ in length");
    let pos = y_true.iter().filter(|&&y| y).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(y_true).filter(|(_, &y)| y).map(|(r, _)| r).sum();
    let (p, n) = (pos as f64, neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroAuc {
    pub value: f64,
    /// One-vs-rest AUC per class; `None` for classes absent from `y_true`.
    pub per_class: Vec<Option<f64>>,
}

/// Unweighted mean of one-vs-rest AUCs, class k scored by its probability.
/// Classes absent from `y_true` are left out of the mean.
pub fn roc_auc_macro_ovr(y_true: &[usize], proba: &[Vec<f64>], k: usize) -> Result<MacroAuc> {
    if y_true.len() != proba.len() {
        return Err(Error::Data("labels and probability rows differ in length".into()));
    }
    let per_class: Vec<Option<f64>> = (0..k)
        .map(|c| {
            let y: Vec<bool> = y_true.iter().map(|&t| t == c).collect();
            let s: Vec<f64> = proba.iter().map(|p| p[c]).collect();
            roc_auc_binary(&y, &s)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.len() < 2 {
        return Err(Error::Data(format!(
            "macro AUC needs at least 2 classes present, found {}",
            present.len()
        )));
    }
    Ok(MacroAuc {
        value: present.iter().sum::<f64>() / present.len() as f64,
        per_class,
    })
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(y: &[bool], s: &[f64]) -> Option<f64> {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] && !y[j] {
                    pairs += 1.0;
                    if s[i] > s[j] {
                        wins += 1.0;
                    } else if s[i] == s[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        (pairs > 0.0).then(|| wins / pairs)
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1], &[1, 0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 2, 3], &[0, 1, 1, 3]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn auc_examples() {
        let y = [false, false, true, true];
        let s = [0.1, 0.4, 0.35, 0.8];
        assert_eq!(roc_auc_binary(&y, &s), brute_auc(&y, &s));
        assert_eq!(roc_auc_binary(&y, &s), Some(0.75));
        assert_eq!(roc_auc_binary(&y, &[0.0, 0.1, 0.5, 0.9]), Some(1.0));
        assert_eq!(roc_auc_binary(&y, &[0.3; 4]), Some(0.5));
        assert_eq!(roc_auc_binary(&[true, true], &[0.1, 0.2]), None);
    }

    #[test]
    fn macro_examples() {
        let y = [0, 1, 1, 0, 1];
        let p: Vec<Vec<f64>> = [0.2, 0.7, 0.6, 0.4, 0.9].iter().map(|&s| vec![1.0 - s, s]).collect();
        let m = roc_auc_macro_ovr(&y, &p, 2).unwrap();
        let b = roc_auc_binary(&y.map(|c| c == 1), &[0.2, 0.7, 0.6, 0.4, 0.9]).unwrap();
        assert!((m.value - b).abs() < 1e-15);

        let y = [0, 1, 2, 3, 2];
        let perfect: Vec<Vec<f64>> = y
            .iter()
            .map(|&c| (0..4).map(|j| f64::from(u8::from(j == c))).collect())
            .collect();
        assert_eq!(roc_auc_macro_ovr(&y, &perfect, 4).unwrap().value, 1.0);
        let uniform = vec![vec![0.25; 4]; 5];
        assert_eq!(roc_auc_macro_ovr(&y, &uniform, 4).unwrap().value, 0.5);
        // absent class is skipped
        let m = roc_auc_macro_ovr(&[0, 1, 0], &vec![vec![0.9, 0.1, 0.0]; 3], 3).unwrap();
        assert_eq!(m.per_class[2], None);
        assert!(roc_auc_macro_ovr(&[1, 1], &vec![vec![0.5, 0.5]; 2], 2).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
        (2usize..120).prop_flat_map(|n| {
            (
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec((0u8..12).prop_map(|v| f64::from(v) / 4.0), n),
            )
        })
    }

    proptest! {
        #[test]
        fn rank_auc_equals_pairwise((y, s) in instance()) {
            let a = roc_auc_binary(&y, &s);
            let b = brute_auc(&y, &s);
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn flip_and_monotone_transform((y, s) in instance()) {
            if let Some(a) = roc_auc_binary(&y, &s) {
                let flipped: Vec<bool> = y.iter().map(|v| !v).collect();
                prop_assert!((roc_auc_binary(&flipped, &s).unwrap() - (1.0 - a)).abs() <= 1e-12);
                let warped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 2.0).collect();
                prop_assert!((roc_auc_binary(&y, &warped).unwrap() - a).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }
    }
}
