use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_scaler(train: &FeatureMatrix) -> Result<ScalerParams> {
    let n = train.rows();
    if n == 0 {
        return Err(Error::Data("cannot fit a scaler on zero rows".into()));
    }
    let d = train.cols();
    let mut mean = vec![0.0; d];
    for row in train.values.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for row in train.values.iter_rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n as f64).sqrt()).collect();
    Ok(ScalerParams { mean, std })
}

/// `(x - mean) / std` per column; zero-variance columns become all zeros.
pub fn apply_scaler(m: &FeatureMatrix, p: &ScalerParams) -> Result<FeatureMatrix> {
    if p.mean.len() != m.cols() || p.std.len() != m.cols() {
        return Err(Error::shape(format!("{} columns", p.mean.len()), m.cols()));
    }
    let mut out = m.clone();
    for r in 0..out.rows() {
        for (c, v) in out.values.row_mut(r).iter_mut().enumerate() {
            *v = if p.std[c] > 0.0 {
                (*v - p.mean[c]) / p.std[c]
            } else {
                0.0
            };
        }
    }
    Ok(out)
}
