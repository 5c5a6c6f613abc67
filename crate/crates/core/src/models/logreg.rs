use serde::{Deserialize, Serialize};

use super::params::LogRegParams;
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Gradient steps actually taken.
    pub epochs_run: usize,
}

impl LogisticModel {
    pub fn score_row(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss plus `l2/2 * |w|^2` (bias unpenalised), with its
/// gradient `(d/dw, d/db)`.
pub fn loss_and_grad(weights: &[f64], bias: f64, x: &Matrix, y: &[u8], l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.rows() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (row, &label) in x.iter_rows().zip(y) {
        let z = dot(weights, row) + bias;
        let t = f64::from(label);
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
        gb += r;
    }
    loss /= n;
    gb /= n;
    let mut penalty = 0.0;
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
        penalty += w * w;
    }
    (loss + 0.5 * l2 * penalty, gw, gb)
}

/// Full-batch gradient descent from zero; stops early once the loss changes
/// by less than 1e-8 between epochs.
pub fn fit(x: &Matrix, y: &[u8], p: &LogRegParams) -> Result<LogisticModel> {
    if !x.all_finite() {
        return Err(Error::Numeric("feature matrix contains non-finite values".into()));
    }
    if x.rows() == 0 {
        return Err(Error::Data("cannot train on zero rows".into()));
    }
    let mut w = vec![0.0; x.cols()];
    let mut b = 0.0;
    let mut prev = f64::INFINITY;
    let mut epochs_run = 0;
    for _ in 0..p.epochs {
        let (loss, gw, gb) = loss_and_grad(&w, b, x, y, p.l2);
        if (prev - loss).abs() < 1e-8 {
            break;
        }
        prev = loss;
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= p.learning_rate * gi;
        }
        b -= p.learning_rate * gb;
        epochs_run += 1;
    }
    if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("logistic regression diverged".into()));
    }
    Ok(LogisticModel {
        weights: w,
        bias: b,
        epochs_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> LogRegParams {
        LogRegParams::default()
    }

    #[test]
    fn separable_pair() {
        let x = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let m = fit(&x, &[0, 1], &params()).unwrap();
        assert!(m.weights[0] > 0.0);
        assert!(m.score_row(&[-1.0]) < 0.5);
        assert!(m.score_row(&[1.0]) >= 0.5);
    }

    #[test]
    fn all_negative_labels_score_low() {
        let x = Matrix::from_rows(&[[0.3, -1.0], [1.2, 0.4], [-0.7, 2.0]]).unwrap();
        let m = fit(&x, &[0, 0, 0], &params()).unwrap();
        for row in x.iter_rows() {
            assert!(m.score_row(row) < 0.5);
        }
    }

    #[test]
    fn duplicated_rows_same_fit() {
        let rows = [[0.5, -1.0], [1.5, 0.2], [-0.3, 0.8], [2.0, -0.1], [-1.1, -0.9]];
        let y = [1, 1, 0, 1, 0];
        let x = Matrix::from_rows(&rows).unwrap();
        let doubled: Vec<[f64; 2]> = rows.iter().chain(rows.iter()).copied().collect();
        let y2: Vec<u8> = y.iter().chain(y.iter()).copied().collect();
        let a = fit(&x, &y, &params()).unwrap();
        let b = fit(&Matrix::from_rows(&doubled).unwrap(), &y2, &params()).unwrap();
        assert!((a.bias - b.bias).abs() < 1e-9);
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa - wb).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_rejected() {
        let x = Matrix::from_rows(&[[f64::NAN], [1.0]]).unwrap();
        assert!(matches!(fit(&x, &[0, 1], &params()), Err(Error::Numeric(_))));
    }

    #[test]
    fn softplus_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
