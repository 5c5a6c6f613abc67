use serde::{Deserialize, Serialize};

use super::logreg::softplus;
use crate::error::{Error, Result};

/// Sigmoid calibration `p = 1 / (1 + exp(a * f + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn apply(&self, f: f64) -> f64 {
        let z = self.a * f + self.b;
        super::logreg::sigmoid(-z)
    }
}

fn objective(raw: &[f64], y: &[u8], a: f64, b: f64) -> f64 {
    raw.iter()
        .zip(y)
        .map(|(&f, &t)| {
            let z = a * f + b;
            // -[t log p + (1 - t) log(1 - p)] with p = sigmoid(-z)
            if t == 1 {
                softplus(z)
            } else {
                softplus(-z)
            }
        })
        .sum()
}

/// Fits `(a, b)` by damped Newton iteration on the cross-entropy against
/// the 0/1 labels, starting from `a = 0` and `b` at the log-odds of the base
/// rate.
pub fn calibrate_platt(raw: &[f64], y: &[u8]) -> Result<Platt> {
    if raw.len() != y.len() {
        return Err(Error::shape(format!("{} labels", raw.len()), y.len()));
    }
    let pos = y.iter().filter(|&&t| t == 1).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Calibration("both classes must be present".into()));
    }
    if raw.iter().any(|f| !f.is_finite()) {
        return Err(Error::Calibration("raw scores must be finite".into()));
    }

    let mut a = 0.0;
    let mut b = (neg as f64 / pos as f64).ln();
    let mut fval = objective(raw, y, a, b);
    const RIDGE: f64 = 1e-12;

    for _ in 0..100 {
        let (mut ga, mut gb) = (0.0, 0.0);
        let (mut h11, mut h12, mut h22) = (RIDGE, 0.0, RIDGE);
        for (&f, &t) in raw.iter().zip(y) {
            let p = super::logreg::sigmoid(-(a * f + b));
            let g = f64::from(t) - p;
            ga += g * f;
            gb += g;
            let w = p * (1.0 - p);
            h11 += w * f * f;
            h12 += w * f;
            h22 += w;
        }
        if ga.abs() < 1e-10 && gb.abs() < 1e-10 {
            break;
        }
        let det = h11 * h22 - h12 * h12;
        if det <= 0.0 || !det.is_finite() {
            break;
        }
        let da = -(h22 * ga - h12 * gb) / det;
        let db = -(-h12 * ga + h11 * gb) / det;
        let slope = ga * da + gb * db;

        let mut step = 1.0;
        let mut accepted = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(raw, y, na, nb);
            if nf < fval + 1e-4 * step * slope {
                a = na;
                b = nb;
                fval = nf;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(Platt { a, b })
}
