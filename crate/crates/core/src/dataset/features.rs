use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::OrdinalBinning;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Where a feature column comes from. Column names carry the source as a
/// `prefix:` so matrices from different sources can be joined without
/// collisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    Survey,
    EmbedSat,
    EmbedGsv,
    Seg,
    Geo,
}

impl FeatureSource {
    pub const ALL: [FeatureSource; 5] = [
        FeatureSource::Survey,
        FeatureSource::EmbedSat,
        FeatureSource::EmbedGsv,
        FeatureSource::Seg,
        FeatureSource::Geo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSource::Survey => "survey",
            FeatureSource::EmbedSat => "embed_sat",
            FeatureSource::EmbedGsv => "embed_gsv",
            FeatureSource::Seg => "seg",
            FeatureSource::Geo => "geo",
        }
    }

    /// Column-name prefix, e.g. `geo:`.
    pub fn prefix(self) -> String {
        format!("{}:", self.name())
    }

    /// File name used for this source's feature table.
    pub fn file_name(self) -> String {
        format!("features_{}.csv", self.name())
    }
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSource::ALL
            .into_iter()
            .find(|src| src.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown feature source {s:?}")))
    }
}

/// Named numeric features aligned to household ids. Missing cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    row_ids: Vec<String>,
    column_names: Vec<String>,
    values: DenseMatrix,
}

impl FeatureMatrix {
    pub fn new(row_ids: Vec<String>, column_names: Vec<String>, values: DenseMatrix) -> Result<Self> {
        if values.rows() != row_ids.len() || values.cols() != column_names.len() {
            return Err(Error::Data(format!(
                "feature matrix is {}x{} but has {} ids and {} column names",
                values.rows(),
                values.cols(),
                row_ids.len(),
                column_names.len()
            )));
        }
        let mut seen = HashSet::with_capacity(column_names.len());
        for c in &column_names {
            if !seen.insert(c.as_str()) {
                return Err(Error::Data(format!("duplicate feature column {c:?}")));
            }
        }
        Ok(Self {
            row_ids,
            column_names,
            values,
        })
    }

    pub fn empty() -> Self {
        Self {
            row_ids: Vec::new(),
            column_names: Vec::new(),
            values: DenseMatrix::zeros(0, 0),
        }
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    /// `None` when the cell is missing.
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values.get(row, col);
        (!v.is_nan()).then_some(v)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// First duplicated row id, if any.
    pub fn duplicate_id(&self) -> Option<&str> {
        let mut seen = HashSet::with_capacity(self.row_ids.len());
        self.row_ids
            .iter()
            .find(|id| !seen.insert(id.as_str()))
            .map(String::as_str)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            row_ids: idx.iter().map(|&i| self.row_ids[i].clone()).collect(),
            column_names: self.column_names.clone(),
            values: self.values.select_rows(idx),
        }
    }

    /// Projects onto `names`, in that order.
    pub fn select_columns(&self, names: &[String]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::Data(format!("unknown feature column {n:?}")))
            })
            .collect::<Result<_>>()?;
        let mut values = DenseMatrix::zeros(self.n_rows(), idx.len());
        for i in 0..self.n_rows() {
            for (k, &j) in idx.iter().enumerate() {
                values.set(i, k, self.values.get(i, j));
            }
        }
        Self::new(self.row_ids.clone(), names.to_vec(), values)
    }

    /// Keeps the columns whose name starts with any of `prefixes`.
    pub fn select_prefixes(&self, prefixes: &[String]) -> Result<Self> {
        let names: Vec<String> = self
            .column_names
            .iter()
            .filter(|c| prefixes.iter().any(|p| c.starts_with(p.as_str())))
            .cloned()
            .collect();
        self.select_columns(&names)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinPolicy {
    /// Ids present in every input.
    Inner,
    /// Every id of the first input; absent cells become missing.
    Left,
}

/// Joins feature matrices on row id. Row order follows the first matrix.
pub fn join_features(matrices: &[FeatureMatrix], policy: JoinPolicy) -> Result<FeatureMatrix> {
    let (first, rest) = matrices
        .split_first()
        .ok_or_else(|| Error::Config("join_features needs at least one matrix".into()))?;
    for m in matrices {
        if let Some(id) = m.duplicate_id() {
            return Err(Error::Data(format!("duplicate row id {id:?} in join input")));
        }
    }
    let lookups: Vec<HashMap<&str, usize>> = rest
        .iter()
        .map(|m| m.row_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect())
        .collect();

    let kept: Vec<usize> = (0..first.n_rows())
        .filter(|&i| match policy {
            JoinPolicy::Left => true,
            JoinPolicy::Inner => lookups.iter().all(|l| l.contains_key(first.row_ids[i].as_str())),
        })
        .collect();

    let mut column_names = first.column_names.clone();
    for m in rest {
        column_names.extend(m.column_names.iter().cloned());
    }
    let width = column_names.len();
    let mut data = Vec::with_capacity(kept.len() * width);
    for &i in &kept {
        data.extend_from_slice(first.values.row(i));
        let id = first.row_ids[i].as_str();
        for (m, lookup) in rest.iter().zip(&lookups) {
            match lookup.get(id) {
                Some(&r) => data.extend_from_slice(m.values.row(r)),
                None => data.extend(std::iter::repeat_n(f64::NAN, m.n_cols())),
            }
        }
    }
    let row_ids = kept.iter().map(|&i| first.row_ids[i].clone()).collect();
    FeatureMatrix::new(row_ids, column_names, DenseMatrix::new(kept.len(), width, data)?)
}

/// Features with one ordinal label per row.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    features: FeatureMatrix,
    labels: Vec<usize>,
    binning: OrdinalBinning,
}

impl LabeledDataset {
    pub fn new(features: FeatureMatrix, labels: Vec<usize>, binning: OrdinalBinning) -> Result<Self> {
        if labels.len() != features.n_rows() {
            return Err(Error::Data(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.n_rows()
            )));
        }
        let k = binning.num_classes();
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Data(format!("label {bad} out of range for {k} classes")));
        }
        Ok(Self {
            features,
            labels,
            binning,
        })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn binning(&self) -> &OrdinalBinning {
        &self.binning
    }

    pub fn num_classes(&self) -> usize {
        self.binning.num_classes()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            binning: self.binning.clone(),
        }
    }

    /// Same rows and labels with a different feature projection.
    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        if features.row_ids() != self.features.row_ids() {
            return Err(Error::Data("replacement features are not row-aligned".into()));
        }
        Self::new(features, self.labels.clone(), self.binning.clone())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fm(ids: &[&str], cols: &[&str], rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::new(
            ids.iter().map(|s| s.to_string()).collect(),
            cols.iter().map(|s| s.to_string()).collect(),
            if rows.is_empty() {
                DenseMatrix::zeros(0, cols.len())
            } else {
                DenseMatrix::from_rows(rows).unwrap()
            },
        )
        .unwrap()
    }

    #[test]
    fn rejects_duplicate_columns() {
        let r = FeatureMatrix::new(vec!["a".into()], vec!["x".into(), "x".into()], DenseMatrix::zeros(1, 2));
        assert!(r.is_err());
    }

    #[test]
    fn self_inner_join_doubles_columns() {
        let a = fm(&["h1", "h2"], &["geo:a"], &[vec![1.0], vec![2.0]]);
        let b = fm(&["h1", "h2"], &["seg:a"], &[vec![1.0], vec![2.0]]);
        let j = join_features(&[a.clone(), b], JoinPolicy::Inner).unwrap();
        assert_eq!(j.row_ids(), a.row_ids());
        assert_eq!(j.n_cols(), 2);
        // Joining a matrix with itself collides on column names.
        assert!(join_features(&[a.clone(), a], JoinPolicy::Inner).is_err());
    }

    #[test]
    fn disjoint_inner_join_is_empty() {
        let a = fm(&["h1"], &["geo:a"], &[vec![1.0]]);
        let b = fm(&["h2"], &["seg:a"], &[vec![1.0]]);
        let j = join_features(&[a, b], JoinPolicy::Inner).unwrap();
        assert_eq!(j.n_rows(), 0);
        assert_eq!(j.n_cols(), 2);
    }

    #[test]
    fn left_join_marks_missing() {
        let a = fm(&["h1", "h2", "h3"], &["geo:a"], &[vec![1.0], vec![2.0], vec![3.0]]);
        let b = fm(
            &["h3", "h1"],
            &["seg:x", "seg:y"],
            &[vec![30.0, 31.0], vec![10.0, 11.0]],
        );
        let j = join_features(&[a, b], JoinPolicy::Left).unwrap();
        // oracle: hash-map join
        let expect: HashMap<&str, [Option<f64>; 3]> = [
            ("h1", [Some(1.0), Some(10.0), Some(11.0)]),
            ("h2", [Some(2.0), None, None]),
            ("h3", [Some(3.0), Some(30.0), Some(31.0)]),
        ]
        .into_iter()
        .collect();
        assert_eq!(j.row_ids(), ["h1", "h2", "h3"]);
        for (i, id) in j.row_ids().iter().enumerate() {
            for (c, want) in expect[id.as_str()].iter().enumerate() {
                assert_eq!(j.value(i, c), *want);
            }
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = fm(&["h1", "h1"], &["geo:a"], &[vec![1.0], vec![2.0]]);
        let b = fm(&["h1"], &["seg:a"], &[vec![1.0]]);
        assert!(matches!(join_features(&[a, b], JoinPolicy::Inner), Err(Error::Data(_))));
    }

    #[test]
    fn labeled_dataset_validates() {
        let a = fm(&["h1"], &["geo:a"], &[vec![1.0]]);
        assert!(LabeledDataset::new(a.clone(), vec![4], OrdinalBinning::water()).is_err());
        assert!(LabeledDataset::new(a.clone(), vec![], OrdinalBinning::water()).is_err());
        assert!(LabeledDataset::new(a, vec![3], OrdinalBinning::water()).is_ok());
    }

    proptest! {
        #[test]
        fn join_then_project_recovers_inputs(
            a_ids in prop::collection::btree_set(0u8..30, 0..20),
            b_ids in prop::collection::btree_set(0u8..30, 0..20),
            left in any::<bool>(),
        ) {
            let mk = |ids: &std::collections::BTreeSet<u8>, col: &str, scale: f64| {
                let ids: Vec<String> = ids.iter().rev().map(|i| format!("h{i}")).collect();
                let n = ids.len();
                let data = (0..n).map(|i| i as f64 * scale).collect();
                FeatureMatrix::new(ids, vec![col.to_string()], DenseMatrix::new(n, 1, data).unwrap()).unwrap()
            };
            let a = mk(&a_ids, "geo:a", 1.0);
            let b = mk(&b_ids, "seg:b", -2.0);
            let policy = if left { JoinPolicy::Left } else { JoinPolicy::Inner };
            let j = join_features(&[a.clone(), b.clone()], policy).unwrap();
            for input in [&a, &b] {
                let proj = j.select_columns(input.column_names()).unwrap();
                for (i, id) in proj.row_ids().iter().enumerate() {
                    if let Some(r) = input.row_ids().iter().position(|x| x == id) {
                        prop_assert_eq!(proj.value(i, 0), input.value(r, 0));
                    }
                }
            }
        }
    }
}
