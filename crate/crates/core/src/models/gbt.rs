//! Second-order gradient boosting on the logistic loss.

use serde::{Deserialize, Serialize};

use super::logreg::{sigmoid, softplus};
use super::params::GbtParams;
use super::tree::{midpoint, Node, Tree};
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;
use crate::rng::name_key;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosted {
    pub base_margin: f64,
    pub eta: f64,
    pub trees: Vec<Tree>,
}

impl GradientBoosted {
    /// Raw margin using only the first `rounds` trees.
    pub fn margin_after(&self, x: &[f64], rounds: usize) -> f64 {
        self.base_margin
            + self.eta
                * self.trees[..rounds.min(self.trees.len())]
                    .iter()
                    .map(|t| t.predict(x))
                    .sum::<f64>()
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.margin_after(x, self.trees.len())
    }

    pub fn score_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

/// Mean logistic loss of margins against labels.
pub fn log_loss(margins: &[f64], y: &[u8]) -> f64 {
    margins
        .iter()
        .zip(y)
        .map(|(&m, &t)| softplus(m) - f64::from(t) * m)
        .sum::<f64>()
        / margins.len() as f64
}

pub fn fit(train: &FeatureMatrix, p: &GbtParams) -> Result<GradientBoosted> {
    let n = train.rows();
    if n == 0 {
        return Err(Error::Data("cannot train on zero rows".into()));
    }
    if !train.values.all_finite() {
        return Err(Error::Numeric("feature matrix contains non-finite values".into()));
    }
    let prior = train.positive_fraction().clamp(1e-15, 1.0 - 1e-15);
    let base_margin = (prior / (1.0 - prior)).ln();

    // Features visited in column-name order so ties resolve independently of position.
    let mut feature_order: Vec<(u64, usize)> = train.columns.iter().map(|c| name_key(c)).zip(0..).collect();
    feature_order.sort_unstable();
    let feature_order: Vec<usize> = feature_order.into_iter().map(|(_, f)| f).collect();

    let mut margins = vec![base_margin; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(p.n_rounds);

    for _ in 0..p.n_rounds {
        for i in 0..n {
            let prob = sigmoid(margins[i]);
            grad[i] = prob - f64::from(train.labels[i]);
            hess[i] = prob * (1.0 - prob);
        }
        let mut builder = Builder {
            train,
            grad: &grad,
            hess: &hess,
            params: p,
            features: &feature_order,
            nodes: Vec::new(),
        };
        let mut rows: Vec<usize> = (0..n).collect();
        builder.grow(&mut rows, 0);
        let tree = Tree { nodes: builder.nodes };
        for (i, m) in margins.iter_mut().enumerate() {
            *m += p.eta * tree.predict(train.values.row(i));
        }
        trees.push(tree);
    }

    Ok(GradientBoosted {
        base_margin,
        eta: p.eta,
        trees,
    })
}

struct Builder<'a> {
    train: &'a FeatureMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbtParams,
    features: &'a [usize],
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let lambda = self.params.lambda;
        self.nodes.push(Node::Leaf {
            value: -g / (h + lambda),
        });

        if depth >= self.params.max_depth || rows.len() < 2 {
            return id;
        }

        let parent_score = g * g / (h + lambda);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut pairs: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
        for &f in self.features {
            pairs.clear();
            pairs.extend(
                rows.iter()
                    .map(|&i| (self.train.values.get(i, f), self.grad[i], self.hess[i])),
            );
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..pairs.len() - 1 {
                gl += pairs[i].1;
                hl += pairs[i].2;
                if pairs[i].0 == pairs[i + 1].0 {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_score);
                if gain > 0.0 && best.is_none_or(|(_, _, b)| gain > b) {
                    best = Some((f, midpoint(pairs[i].0, pairs[i + 1].0), gain));
                }
            }
        }
        let Some((feature, threshold, _)) = best else {
            return id;
        };

        let mut split = 0;
        for i in 0..rows.len() {
            if self.train.values.get(rows[i], feature) <= threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn one_d(n: usize) -> FeatureMatrix {
        let rows: Vec<[f64; 1]> = (0..n).map(|i| [i as f64 - n as f64 / 2.0]).collect();
        let y = (0..n).map(|i| u8::from(i >= n / 2)).collect();
        FeatureMatrix::unnamed(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    #[test]
    fn zero_rounds_is_prior() {
        let mut m = one_d(40);
        m.labels[0] = 1; // 21 of 40
        let p = GbtParams {
            n_rounds: 0,
            ..GbtParams::default()
        };
        let model = fit(&m, &p).unwrap();
        for row in m.values.iter_rows() {
            assert!((model.score_row(row) - 21.0 / 40.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_strictly_decreases_on_separable_data() {
        let m = one_d(60);
        // hessians shrink as the fit sharpens; without the child-weight floor a split always helps
        let p = GbtParams {
            n_rounds: 50,
            min_child_weight: 0.0,
            ..GbtParams::default()
        };
        let model = fit(&m, &p).unwrap();
        let mut prev = f64::INFINITY;
        for r in 0..=50 {
            let margins: Vec<f64> = m.values.iter_rows().map(|x| model.margin_after(x, r)).collect();
            let loss = log_loss(&margins, &m.labels);
            assert!(loss < prev, "round {r}: {loss} !< {prev}");
            prev = loss;
        }
    }

    #[test]
    fn huge_lambda_pins_to_base_rate() {
        let m = one_d(30);
        let p = GbtParams {
            lambda: 1e12,
            ..GbtParams::default()
        };
        let model = fit(&m, &p).unwrap();
        for row in m.values.iter_rows() {
            assert!((model.score_row(row) - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn split_gain_matches_formula() {
        // two rows, one per class, at prior 0.5: g = [0.5, -0.5], h = [0.25, 0.25]
        let m = FeatureMatrix::unnamed(Matrix::from_rows(&[[0.0], [1.0]]).unwrap(), vec![0, 1]).unwrap();
        let p = GbtParams {
            n_rounds: 1,
            max_depth: 1,
            min_child_weight: 0.0,
            lambda: 1.0,
            eta: 1.0,
        };
        let model = fit(&m, &p).unwrap();
        // leaf = -G / (H + lambda) = -0.5 / 1.25 and +0.5 / 1.25
        assert!((model.trees[0].predict(&[0.0]) + 0.4).abs() < 1e-15);
        assert!((model.trees[0].predict(&[1.0]) - 0.4).abs() < 1e-15);
    }
}
