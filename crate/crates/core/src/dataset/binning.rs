use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered cut points mapping a non-negative target to class indices `0..K`.
///
/// Classes are open below and closed above: a value exactly on an edge falls
/// into the lower class, so the "0–8 KL" tier includes 8.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BinningRepr", into = "BinningRepr")]
pub struct OrdinalBinning {
    name: String,
    edges: Vec<f64>,
    class_labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct BinningRepr {
    name: String,
    edges: Vec<f64>,
    labels: Vec<String>,
}

impl TryFrom<BinningRepr> for OrdinalBinning {
    type Error = Error;

    fn try_from(r: BinningRepr) -> Result<Self> {
        OrdinalBinning::new(r.name, r.edges, r.labels)
    }
}

impl From<OrdinalBinning> for BinningRepr {
    fn from(b: OrdinalBinning) -> Self {
        BinningRepr {
            name: b.name,
            edges: b.edges,
            labels: b.class_labels,
        }
    }
}

impl OrdinalBinning {
    pub fn new(name: impl Into<String>, edges: Vec<f64>, class_labels: Vec<String>) -> Result<Self> {
        let name = name.into();
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::Config(format!("binning {name}: edges must be finite")));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "binning {name}: edges must be strictly increasing, got {edges:?}"
            )));
        }
        if class_labels.len() != edges.len() + 1 {
            return Err(Error::Config(format!(
                "binning {name}: {} edges need {} labels, got {}",
                edges.len(),
                edges.len() + 1,
                class_labels.len()
            )));
        }
        Ok(Self {
            name,
            edges,
            class_labels,
        })
    }

    /// Monthly household income brackets (Rs): 0–10K, 10–20K, 20–50K, >50K.
    pub fn income() -> Self {
        Self::new(
            "income",
            vec![10_000.0, 20_000.0, 50_000.0],
            ["Rs 0-10K", "Rs 10-20K", "Rs 20-50K", ">Rs 50K"]
                .map(String::from)
                .to_vec(),
        )
        .expect("static binning")
    }

    /// Municipal water tariff tiers (kilolitres per month): 0–8, 8–15, 15–25, >25.
    pub fn water() -> Self {
        Self::new(
            "water",
            vec![8.0, 15.0, 25.0],
            ["0-8 KL", "8-15 KL", "15-25 KL", ">25 KL"].map(String::from).to_vec(),
        )
        .expect("static binning")
    }

    /// `K` classes with edges at `step, 2*step, ...`.
    pub fn uniform(name: &str, classes: usize, step: f64, unit: &str) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Config(format!("binning {name}: need at least 2 classes")));
        }
        let edges: Vec<f64> = (1..classes).map(|j| step * j as f64).collect();
        let mut labels = Vec::with_capacity(classes);
        let mut lo = 0.0;
        for e in &edges {
            labels.push(format!("{lo}-{e} {unit}"));
            lo = *e;
        }
        labels.push(format!(">{lo} {unit}"));
        Self::new(name, edges, labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn num_classes(&self) -> usize {
        self.class_labels.len()
    }

    /// Class index of `value`: the number of edges strictly below it.
    pub fn bin(&self, value: f64) -> Result<usize> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::Domain(format!(
                "binning {}: target must be non-negative, got {value}",
                self.name
            )));
        }
        Ok(self.edges.partition_point(|&e| value > e))
    }
}

/// Free-function form of [`OrdinalBinning::bin`].
pub fn bin_target(value: f64, binning: &OrdinalBinning) -> Result<usize> {
    binning.bin(value)
}
