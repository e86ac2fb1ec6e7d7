//! Per-feature histogram binning.
//!
//! A feature with at most [`MAX_BINS`] distinct values gets one bin per
//! value, with cut points half-way between neighbours, so histogram split
//! search sees exactly the same candidate partitions as an exhaustive scan.
//! Features with more distinct values get count-quantile cut points.

use serde::{Deserialize, Serialize};

use crate::matrix::DenseMatrix;

pub const MAX_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    /// Strictly increasing; `x <= cuts[b]` means bin `<= b`.
    cuts: Vec<f64>,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

impl BinMapper {
    pub fn fit(values: &[f64]) -> Self {
        let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
        sorted.sort_by(f64::total_cmp);
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for v in sorted {
            match distinct.last_mut() {
                Some((last, c)) if *last == v => *c += 1,
                _ => distinct.push((v, 1)),
            }
        }
        if distinct.len() <= MAX_BINS {
            let cuts = distinct.windows(2).map(|w| midpoint(w[0].0, w[1].0)).collect();
            return Self { cuts };
        }
        let total: usize = distinct.iter().map(|d| d.1).sum();
        let per_bin = total as f64 / MAX_BINS as f64;
        let mut cuts = Vec::with_capacity(MAX_BINS - 1);
        let mut cum = 0usize;
        for i in 0..distinct.len() - 1 {
            cum += distinct[i].1;
            if cum as f64 >= (cuts.len() + 1) as f64 * per_bin {
                cuts.push(midpoint(distinct[i].0, distinct[i + 1].0));
                if cuts.len() == MAX_BINS - 1 {
                    break;
                }
            }
        }
        Self { cuts }
    }

    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }

    #[inline]
    pub fn bin(&self, x: f64) -> u8 {
        self.cuts.partition_point(|&c| x > c) as u8
    }

    /// Upper threshold of `bin`: values `<=` it fall at or below the bin.
    pub fn threshold(&self, bin: usize) -> f64 {
        self.cuts[bin]
    }
}

/// Column-major binned copy of a feature matrix.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    columns: Vec<Vec<u8>>,
    mappers: Vec<BinMapper>,
}

impl BinnedMatrix {
    pub fn fit(x: &DenseMatrix) -> Self {
        let mut columns = Vec::with_capacity(x.cols());
        let mut mappers = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            let col = x.column(j);
            let m = BinMapper::fit(&col);
            columns.push(col.iter().map(|&v| m.bin(v)).collect());
            mappers.push(m);
        }
        Self {
            n_rows: x.rows(),
            columns,
            mappers,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[u8] {
        &self.columns[j]
    }

    pub fn mapper(&self, j: usize) -> &BinMapper {
        &self.mappers[j]
    }
}
