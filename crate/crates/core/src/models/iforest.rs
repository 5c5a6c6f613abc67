//! Isolation forest: random axis-aligned partitioning of subsamples.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::IsolationParams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{keyed_rng, TAG_BOOTSTRAP, TAG_NODE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IsoNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// `adjustment = c(size)`, the expected remaining path length.
    External { size: usize, adjustment: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<IsoNode>,
}

impl IsolationTree {
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[i] {
                IsoNode::External { adjustment, .. } => return depth + adjustment,
                IsoNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature] < threshold { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    /// Effective subsample size.
    pub psi: usize,
    /// Normaliser `c(psi)`.
    pub c_psi: f64,
}

impl IsolationForest {
    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// `2^(-E[h(x)] / c(psi))`.
    pub fn score_row(&self, x: &[f64]) -> f64 {
        2f64.powf(-self.mean_path_length(x) / self.c_psi)
    }
}

/// Exact harmonic number `H(k) = 1 + 1/2 + ... + 1/k`.
pub fn harmonic(k: usize) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

/// Average unsuccessful-search path length in a binary search tree of `n`
/// nodes: `2 H(n-1) - 2 (n-1) / n`, and 0 for `n <= 1`.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let m = (n - 1) as f64;
    2.0 * harmonic(n - 1) - 2.0 * m / n as f64
}

pub fn fit(x: &Matrix, p: &IsolationParams, seed: u64) -> Result<IsolationForest> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::Data(format!("isolation forest needs at least 2 rows, got {n}")));
    }
    if !x.all_finite() {
        return Err(Error::Numeric("feature matrix contains non-finite values".into()));
    }
    let psi = p.subsample.min(n);
    let height_limit = (psi as f64).log2().ceil() as usize;

    let trees = (0..p.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = keyed_rng(&[TAG_BOOTSTRAP, seed, t as u64]);
            let mut rows = sample(&mut rng, n, psi).into_vec();
            let mut builder = Builder {
                x,
                seed,
                tree: t as u64,
                height_limit,
                nodes: Vec::new(),
            };
            builder.grow(&mut rows, 0, 1);
            IsolationTree { nodes: builder.nodes }
        })
        .collect();

    Ok(IsolationForest {
        trees,
        psi,
        c_psi: average_path_length(psi),
    })
}

struct Builder<'a> {
    x: &'a Matrix,
    seed: u64,
    tree: u64,
    height_limit: usize,
    nodes: Vec<IsoNode>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize, heap_id: u64) -> usize {
        let id = self.nodes.len();
        let external = IsoNode::External {
            size: rows.len(),
            adjustment: average_path_length(rows.len()),
        };
        self.nodes.push(external);
        if depth >= self.height_limit || rows.len() <= 1 {
            return id;
        }

        // Candidate features are those not constant within the node.
        let ranges: Vec<(usize, f64, f64)> = (0..self.x.cols())
            .filter_map(|f| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    let v = self.x.get(r, f);
                    (lo.min(v), hi.max(v))
                });
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let mut rng = keyed_rng(&[TAG_NODE, self.seed, self.tree, heap_id]);
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let threshold = lo + rng.random::<f64>() * (hi - lo);

        let mut split = 0;
        for i in 0..rows.len() {
            if self.x.get(rows[i], feature) < threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split);
        let left = self.grow(l, depth + 1, heap_id * 2);
        let right = self.grow(r, depth + 1, heap_id * 2 + 1);
        self.nodes[id] = IsoNode::Internal {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Smallest training score among the top `contamination` fraction; scores at
/// or above it are labelled anomalous.
pub fn contamination_threshold(train_scores: &[f64], contamination: f64) -> f64 {
    let mut sorted = train_scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((contamination * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}
