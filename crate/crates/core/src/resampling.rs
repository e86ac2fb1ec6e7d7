//! SMOTE over-sampling for binary training sets.
//!
//! Synthetic minority rows are interpolated between a minority row and one of
//! its k nearest minority neighbours (Euclidean, self excluded, ties to the
//! lower row index). Base rows are visited round-robin in a seeded shuffle.

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::seed;

fn d_k() -> usize {
    5
}
fn d_ratio() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteSpec {
    #[serde(default = "d_k")]
    pub k_neighbors: usize,
    /// Minority/majority ratio after resampling.
    #[serde(default = "d_ratio")]
    pub target_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SmoteSpec {
    fn default() -> Self {
        SmoteSpec {
            k_neighbors: d_k(),
            target_ratio: d_ratio(),
            seed: 0,
        }
    }
}

impl SmoteSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 1 {
            return Err(Error::Config("smote k_neighbors must be >= 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "smote target_ratio must lie in (0, 1], got {}",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteReport {
    pub minority_label: u8,
    pub minority_before: usize,
    pub majority: usize,
    pub synthetic: usize,
    /// Neighbour count actually used (after clamping).
    pub k_used: usize,
}

#[derive(Debug, Clone)]
pub struct Resampled {
    pub x: DenseMatrix,
    pub y: Vec<u8>,
    pub report: SmoteReport,
}

/// Indices (into `pool`) of the `k` nearest pool rows to `pool[r]`, self excluded.
fn nearest(x: &DenseMatrix, pool: &[usize], r: usize, k: usize) -> Vec<usize> {
    let base = x.row(pool[r]);
    let mut d: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != r)
        .map(|(j, &row)| {
            let dist = x.row(row).iter().zip(base).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (dist, j)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, j)| j).collect()
}

pub(crate) fn interpolate(r: &[f64], n: &[f64], lambda: f64) -> Vec<f64> {
    r.iter().zip(n).map(|(a, b)| a + lambda * (b - a)).collect()
}

/// Over-sample the minority class of `y` until it reaches
/// `round(target_ratio * majority)` rows. Original rows come first, unchanged.
pub fn smote(x: &DenseMatrix, y: &[u8], spec: &SmoteSpec) -> Result<Resampled> {
    spec.validate()?;
    if x.rows() != y.len() {
        return Err(Error::Data(format!("{} feature rows but {} labels", x.rows(), y.len())));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    let neg = y.len() - pos;
    let (minority_label, m, majority) = if pos < neg { (1u8, pos, neg) } else { (0u8, neg, pos) };
    let target = (spec.target_ratio * majority as f64).round() as usize;
    let needed = target.saturating_sub(m);
    let mut report = SmoteReport {
        minority_label,
        minority_before: m,
        majority,
        synthetic: needed,
        k_used: 0,
    };
    if needed == 0 {
        return Ok(Resampled {
            x: x.clone(),
            y: y.to_vec(),
            report,
        });
    }
    if m < 2 {
        return Err(Error::Resampling(format!(
            "minority class has {m} row(s); at least 2 are needed"
        )));
    }
    let k = spec.k_neighbors.min(m - 1);
    if k < spec.k_neighbors {
        warn!(
            "smote: k_neighbors {} clamped to {k} (minority size {m})",
            spec.k_neighbors
        );
    }
    report.k_used = k;

    let pool: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    let mut rng = seed::rng(spec.seed);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let mut neighbours: Vec<Option<Vec<usize>>> = vec![None; m];

    let mut data = Vec::with_capacity((y.len() + needed) * x.cols());
    data.extend_from_slice(x.as_slice());
    for t in 0..needed {
        let r = order[t % m];
        let nn = neighbours[r].get_or_insert_with(|| nearest(x, &pool, r, k));
        let n = nn[rng.random_range(0..k)];
        let lambda: f64 = rng.random();
        data.extend(interpolate(x.row(pool[r]), x.row(pool[n]), lambda));
    }
    let mut labels = y.to_vec();
    labels.extend(std::iter::repeat_n(minority_label, needed));
    Ok(Resampled {
        x: DenseMatrix::new(y.len() + needed, x.cols(), data)?,
        y: labels,
        report,
    })
}
