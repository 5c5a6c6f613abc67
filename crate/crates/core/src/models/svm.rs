//! RBF-kernel SVM trained with the simplified SMO procedure: for each KKT
//! violator `i` a random partner `j` is optimised jointly; training ends after
//! `max_passes` consecutive sweeps without any update.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Gamma, SvmParams};
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::rng::{keyed_rng, TAG_SMO};

/// Kernel rows are cached in full up to this many training points.
const DENSE_KERNEL_LIMIT: usize = 8000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Matrix,
    /// `alpha_i * y_i` per support vector, `y` in {-1, +1}.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
}

impl SvmModel {
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter_rows()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * (-self.gamma * squared_distance(sv, x)).exp())
            .sum::<f64>()
            + self.bias
    }
}

/// Full training state, kept for KKT inspection in tests.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub sweeps: usize,
    pub converged: bool,
}

pub fn resolve_gamma(x: &Matrix, gamma: Gamma) -> f64 {
    match gamma {
        Gamma::Value(g) => g,
        Gamma::Scale => {
            let n = x.as_slice().len() as f64;
            let mean = x.as_slice().iter().sum::<f64>() / n;
            let var = x.as_slice().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if var > 0.0 {
                1.0 / (x.cols() as f64 * var)
            } else {
                1.0
            }
        }
    }
}

enum Kernel<'a> {
    Dense(Matrix),
    Lazy { x: &'a Matrix, gamma: f64 },
}

impl Kernel<'_> {
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Kernel::Dense(k) => k.get(i, j),
            Kernel::Lazy { x, gamma } => (-gamma * squared_distance(x.row(i), x.row(j))).exp(),
        }
    }
}

fn signed(y: &[u8]) -> Vec<f64> {
    y.iter().map(|&t| if t == 1 { 1.0 } else { -1.0 }).collect()
}

pub fn solve(x: &Matrix, y: &[u8], p: &SvmParams, seed: u64) -> Result<SmoSolution> {
    let n = x.rows();
    if n != y.len() {
        return Err(Error::shape(format!("{n} labels"), y.len()));
    }
    if !y.contains(&0) || !y.contains(&1) {
        return Err(Error::Data("SVM training needs both classes".into()));
    }
    if !x.all_finite() {
        return Err(Error::Numeric("feature matrix contains non-finite values".into()));
    }
    let gamma = resolve_gamma(x, p.gamma);
    let kernel = if n <= DENSE_KERNEL_LIMIT {
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            k.set(i, i, 1.0);
            for j in 0..i {
                let v = (-gamma * squared_distance(x.row(i), x.row(j))).exp();
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        Kernel::Dense(k)
    } else {
        Kernel::Lazy { x, gamma }
    };

    let ys = signed(y);
    let c = p.c;
    let mut alpha = vec![0.0; n];
    let mut b = 0.0;
    // f[i] = sum_k alpha_k y_k K(k, i), excluding the bias
    let mut f = vec![0.0; n];
    let mut rng = keyed_rng(&[TAG_SMO, seed]);
    let mut passes = 0;
    let mut sweeps = 0;

    while passes < p.max_passes && sweeps < p.max_iter {
        sweeps += 1;
        let mut changed = 0;
        for i in 0..n {
            let ei = f[i] + b - ys[i];
            let r = ys[i] * ei;
            if !((r < -p.tol && alpha[i] < c) || (r > p.tol && alpha[i] > 0.0)) {
                continue;
            }
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let ej = f[j] + b - ys[j];
            let (ai_old, aj_old) = (alpha[i], alpha[j]);
            let (lo, hi) = if ys[i] != ys[j] {
                ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
            } else {
                ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
            };
            if lo >= hi {
                continue;
            }
            let kij = kernel.get(i, j);
            let kii = kernel.get(i, i);
            let kjj = kernel.get(j, j);
            let eta = 2.0 * kij - kii - kjj;
            if eta >= 0.0 {
                continue;
            }
            let aj = (aj_old - ys[j] * (ei - ej) / eta).clamp(lo, hi);
            if (aj - aj_old).abs() < 1e-5 {
                continue;
            }
            let ai = (ai_old + ys[i] * ys[j] * (aj_old - aj)).clamp(0.0, c);
            alpha[i] = ai;
            alpha[j] = aj;

            let di = ys[i] * (ai - ai_old);
            let dj = ys[j] * (aj - aj_old);
            let b1 = b - ei - di * kii - dj * kij;
            let b2 = b - ej - di * kij - dj * kjj;
            b = if ai > 0.0 && ai < c {
                b1
            } else if aj > 0.0 && aj < c {
                b2
            } else {
                (b1 + b2) / 2.0
            };
            for (k, fk) in f.iter_mut().enumerate() {
                *fk += di * kernel.get(i, k) + dj * kernel.get(j, k);
            }
            changed += 1;
        }
        passes = if changed == 0 { passes + 1 } else { 0 };
    }

    Ok(SmoSolution {
        alphas: alpha,
        bias: b,
        gamma,
        sweeps,
        converged: passes >= p.max_passes,
    })
}

pub fn fit(x: &Matrix, y: &[u8], p: &SvmParams, seed: u64) -> Result<SvmModel> {
    let sol = solve(x, y, p, seed)?;
    let ys = signed(y);
    let sv: Vec<usize> = (0..x.rows()).filter(|&i| sol.alphas[i] > 0.0).collect();
    Ok(SvmModel {
        support_vectors: x.select_rows(&sv),
        dual_coef: sv.iter().map(|&i| sol.alphas[i] * ys[i]).collect(),
        bias: sol.bias,
        gamma: sol.gamma,
    })
}
