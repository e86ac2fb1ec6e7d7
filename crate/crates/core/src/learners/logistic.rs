//! L2-regularised logistic regression fitted by damped Newton steps on
//! standardised features.

use serde::{Deserialize, Serialize};

use super::{check_binary, sigmoid};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// In the original feature units.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn predict_proba_row(&self, x: &[f64]) -> f64 {
        let eta = self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>();
        sigmoid(eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub l2_penalty: f64,
    pub max_iter: usize,
    pub tol: f64,
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn linear(theta: &[f64], row: &[f64]) -> f64 {
    theta[0] + row.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>()
}

/// Mean log-loss plus `l2/2 * |w|^2`; `theta = [intercept, w...]`. The
/// intercept is not penalised.
pub fn objective(theta: &[f64], x: &DenseMatrix, y: &[u8], l2: f64) -> f64 {
    let n = x.rows() as f64;
    let loss: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, &yi)| {
            let eta = linear(theta, r);
            softplus(eta) - f64::from(yi) * eta
        })
        .sum();
    loss / n + 0.5 * l2 * theta[1..].iter().map(|w| w * w).sum::<f64>()
}

pub fn gradient(theta: &[f64], x: &DenseMatrix, y: &[u8], l2: f64) -> Vec<f64> {
    let n = x.rows() as f64;
    let mut g = vec![0.0; theta.len()];
    for (r, &yi) in x.iter_rows().zip(y) {
        let e = sigmoid(linear(theta, r)) - f64::from(yi);
        g[0] += e;
        for (gj, xj) in g[1..].iter_mut().zip(r) {
            *gj += e * xj;
        }
    }
    for gj in &mut g {
        *gj /= n;
    }
    for (gj, wj) in g[1..].iter_mut().zip(&theta[1..]) {
        *gj += l2 * wj;
    }
    g
}

fn hessian(theta: &[f64], x: &DenseMatrix, l2: f64) -> Vec<f64> {
    let d = theta.len();
    let n = x.rows() as f64;
    let mut h = vec![0.0; d * d];
    let mut z = vec![0.0; d];
    z[0] = 1.0;
    for r in x.iter_rows() {
        let p = sigmoid(linear(theta, r));
        let w = p * (1.0 - p);
        z[1..].copy_from_slice(r);
        for a in 0..d {
            let wa = w * z[a];
            if wa == 0.0 {
                continue;
            }
            for b in a..d {
                h[a * d + b] += wa * z[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            h[a * d + b] /= n;
            h[b * d + a] = h[a * d + b];
        }
    }
    for a in 1..d {
        h[a * d + a] += l2;
    }
    h
}

/// Solves `h x = b` for symmetric positive (semi-)definite `h`, adding jitter
/// to the diagonal when the factorisation breaks down.
fn solve_spd(h: &[f64], b: &[f64]) -> Vec<f64> {
    let d = b.len();
    let mut jitter = 0.0;
    loop {
        let mut l = vec![0.0; d * d];
        let mut ok = true;
        'outer: for i in 0..d {
            for j in 0..=i {
                let mut s = h[i * d + j] + if i == j { jitter } else { 0.0 };
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        ok = false;
                        break 'outer;
                    }
                    l[i * d + i] = s.sqrt();
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        if ok {
            let mut y = vec![0.0; d];
            for i in 0..d {
                let s: f64 = (0..i).map(|k| l[i * d + k] * y[k]).sum();
                y[i] = (b[i] - s) / l[i * d + i];
            }
            let mut x = vec![0.0; d];
            for i in (0..d).rev() {
                let s: f64 = (i + 1..d).map(|k| l[k * d + i] * x[k]).sum();
                x[i] = (y[i] - s) / l[i * d + i];
            }
            return x;
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
    }
}

/// Column means and standard deviations (zero deviations become one).
fn standardizer(x: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    let mut mean = vec![0.0; x.cols()];
    for r in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.cols()];
    for r in x.iter_rows() {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let sd = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

pub fn fit_logistic(x: &DenseMatrix, y: &[u8], params: &LogisticParams) -> Result<LogisticModel> {
    check_binary(y)?;
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("logistic regression needs finite features".into()));
    }
    let (mean, sd) = standardizer(x);
    let mut z = x.clone();
    for i in 0..z.rows() {
        for (j, v) in z.row_mut(i).iter_mut().enumerate() {
            *v = (*v - mean[j]) / sd[j];
        }
    }
    let l2 = params.l2_penalty;
    let d = x.cols() + 1;
    let mut theta = vec![0.0; d];
    let pos = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
    theta[0] = (pos / (1.0 - pos)).ln();

    let mut f = objective(&theta, &z, y, l2);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..params.max_iter {
        let g = gradient(&theta, &z, y, l2);
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < params.tol {
            converged = true;
            break;
        }
        iterations = it + 1;
        let step = solve_spd(&hessian(&theta, &z, l2), &g);
        let mut t = 1.0;
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        loop {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let fc = objective(&cand, &z, y, l2);
            if fc <= f - 1e-4 * t * slope || t < 1e-10 {
                theta = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
        if !f.is_finite() {
            return Err(Error::Fit("logistic objective diverged".into()));
        }
    }
    if !converged {
        let g = gradient(&theta, &z, y, l2);
        converged = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < params.tol;
    }

    let coefficients: Vec<f64> = theta[1..].iter().zip(&sd).map(|(w, s)| w / s).collect();
    let intercept = theta[0] - coefficients.iter().zip(&mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LogisticModel {
        coefficients,
        intercept,
        iterations,
        converged,
    })
}
