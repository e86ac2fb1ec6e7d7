//! Seeded workloads shared by the benchmarks.

use hydrotier::{seed, DenseMatrix};
use rand::Rng;

/// `rows x cols` uniform features with a noisy linear binary target.
pub fn binary_problem(rows: usize, cols: usize, s: u64) -> (DenseMatrix, Vec<u8>) {
    let mut rng = seed::rng(s);
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = DenseMatrix::new(rows, cols, data).expect("shape");
    let y = (0..rows)
        .map(|i| {
            let z: f64 = x.row(i).iter().take(3).sum::<f64>() + rng.random_range(-0.5..0.5);
            u8::from(z > 0.0)
        })
        .collect();
    (x, y)
}

/// Labels with roughly `rate` positives and heavily tied scores.
pub fn scored_labels(n: usize, rate: f64, s: u64) -> (Vec<bool>, Vec<f64>) {
    let mut rng = seed::rng(s);
    (0..n)
        .map(|_| {
            let y = rng.random_bool(rate);
            let score = f64::from(rng.random_range(0..100u8)) / 100.0 + if y { 0.1 } else { 0.0 };
            (y, score)
        })
        .unzip()
}

/// Binary problem where the positive class is `minority` of the rows.
pub fn imbalanced(rows: usize, cols: usize, minority: f64, s: u64) -> (DenseMatrix, Vec<u8>) {
    let (x, _) = binary_problem(rows, cols, s);
    let mut rng = seed::rng(s ^ 1);
    let y = (0..rows).map(|_| u8::from(rng.random_bool(minority))).collect();
    (x, y)
}
