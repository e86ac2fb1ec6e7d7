use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Row-normalised: entry (i, j) is the share of true-i rows predicted j.
    pub normalized: Vec<Vec<f64>>,
    pub counts: Vec<Vec<usize>>,
    /// True classes with no rows; their normalised rows are all zero.
    pub unsupported: Vec<usize>,
}

impl ConfusionMatrix {
    /// Support-weighted diagonal, i.e. the accuracy of the pooled predictions.
    pub fn weighted_diagonal(&self) -> f64 {
        let total: usize = self.counts.iter().flatten().sum();
        let diag: usize = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / total as f64
    }
}

pub fn confusion_matrix_normalized(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Data("true and predicted labels differ in length".into()));
    }
    let mut counts = vec![vec![0usize; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::Data(format!("label {} outside 0..{k}", t.max(p))));
        }
        counts[t][p] += 1;
    }
    let mut unsupported = Vec::new();
    let normalized = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let n: usize = row.iter().sum();
            if n == 0 {
                unsupported.push(i);
                vec![0.0; k]
            } else {
                row.iter().map(|&c| c as f64 / n as f64).collect()
            }
        })
        .collect();
    Ok(ConfusionMatrix {
        normalized,
        counts,
        unsupported,
    })
}
