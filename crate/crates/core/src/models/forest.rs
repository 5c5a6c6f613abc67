//! Bootstrap-aggregated CART classifiers with Gini splits.
//!
//! Per-node candidate features are ordered by a hash of
//! `(seed, tree, node, column name)`, so the fitted forest does not depend on
//! column positions or on how trees are scheduled across threads.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::ForestParams;
use super::tree::{midpoint, Node, Tree};
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;
use crate::rng::{key, keyed_rng, name_key, TAG_BOOTSTRAP, TAG_NODE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    /// Mean decrease in impurity, normalised to sum to 1 when any split exists.
    pub feature_importances: Vec<f64>,
}

impl RandomForest {
    /// Mean class-1 leaf fraction across trees.
    pub fn score_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit(train: &FeatureMatrix, p: &ForestParams, seed: u64) -> Result<RandomForest> {
    let n = train.rows();
    if n == 0 {
        return Err(Error::Data("cannot train on zero rows".into()));
    }
    let d = train.cols();
    let col_keys: Vec<u64> = train.columns.iter().map(|c| name_key(c)).collect();
    let mtry = p.max_features.resolve(d);

    let fitted: Vec<(Tree, Vec<f64>)> = (0..p.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = keyed_rng(&[TAG_BOOTSTRAP, seed, t as u64]);
            let mut sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut builder = Builder {
                train,
                col_keys: &col_keys,
                mtry,
                params: p,
                seed,
                tree: t as u64,
                nodes: Vec::new(),
                importance: vec![0.0; d],
            };
            builder.grow(&mut sample, 0, 1);
            (Tree { nodes: builder.nodes }, builder.importance)
        })
        .collect();

    let mut importances = vec![0.0; d];
    let mut trees = Vec::with_capacity(fitted.len());
    for (tree, imp) in fitted {
        let total: f64 = imp.iter().sum();
        if total > 0.0 {
            for (acc, v) in importances.iter_mut().zip(&imp) {
                *acc += v / total;
            }
        }
        trees.push(tree);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    }
    Ok(RandomForest {
        trees,
        feature_importances: importances,
    })
}

struct Builder<'a> {
    train: &'a FeatureMatrix,
    col_keys: &'a [u64],
    mtry: usize,
    params: &'a ForestParams,
    seed: u64,
    tree: u64,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

#[inline]
fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

impl Builder<'_> {
    fn grow(&mut self, samples: &mut [usize], depth: usize, heap_id: u64) -> usize {
        let id = self.nodes.len();
        let m = samples.len();
        let pos = samples.iter().filter(|&&i| self.train.labels[i] == 1).count();
        let value = pos as f64 / m as f64;
        self.nodes.push(Node::Leaf { value });

        if depth >= self.params.max_depth || m < self.params.min_samples_split || pos == 0 || pos == m {
            return id;
        }
        let Some(best) = self.best_split(samples, pos, heap_id) else {
            return id;
        };

        self.importance[best.feature] += best.decrease * m as f64;
        let x = &self.train.values;
        let mut split = 0;
        for i in 0..m {
            if x.get(samples[i], best.feature) <= best.threshold {
                samples.swap(i, split);
                split += 1;
            }
        }
        let (left_rows, right_rows) = samples.split_at_mut(split);
        let left = self.grow(left_rows, depth + 1, heap_id * 2);
        let right = self.grow(right_rows, depth + 1, heap_id * 2 + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Examines features in keyed order until `mtry` non-constant ones have
    /// been seen; returns the largest Gini decrease (zero allowed, so XOR-like
    /// nodes still split).
    fn best_split(&self, samples: &[usize], pos: usize, heap_id: u64) -> Option<Candidate> {
        let d = self.col_keys.len();
        let mut order: Vec<(u64, u64, usize)> = (0..d)
            .map(|f| {
                let k = key(&[TAG_NODE, self.seed, self.tree, heap_id, self.col_keys[f]]);
                (k, self.col_keys[f], f)
            })
            .collect();
        order.sort_unstable();

        let m = samples.len() as f64;
        let parent = gini(pos as f64, m);
        let mut best: Option<Candidate> = None;
        let mut visited = 0;
        let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(samples.len());

        for &(_, _, f) in &order {
            if visited >= self.mtry {
                break;
            }
            pairs.clear();
            pairs.extend(
                samples
                    .iter()
                    .map(|&i| (self.train.values.get(i, f), self.train.labels[i])),
            );
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue;
            }
            visited += 1;

            let mut left_pos = 0.0;
            for i in 0..pairs.len() - 1 {
                left_pos += f64::from(pairs[i].1);
                if pairs[i].0 == pairs[i + 1].0 {
                    continue;
                }
                let nl = (i + 1) as f64;
                let nr = m - nl;
                let right_pos = pos as f64 - left_pos;
                let weighted = (nl * gini(left_pos, nl) + nr * gini(right_pos, nr)) / m;
                let decrease = parent - weighted;
                if best.as_ref().is_none_or(|b| decrease > b.decrease) {
                    best = Some(Candidate {
                        feature: f,
                        threshold: midpoint(pairs[i].0, pairs[i + 1].0),
                        decrease,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn xor(copies: usize) -> FeatureMatrix {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..copies {
            for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                rows.push([a, b]);
                y.push(u8::from(a != b));
            }
        }
        FeatureMatrix::unnamed(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    #[test]
    fn xor_fits_exactly() {
        let m = xor(50);
        for depth in [2, 5, 12] {
            let p = ForestParams {
                max_depth: depth,
                n_trees: 20,
                ..ForestParams::default()
            };
            let f = fit(&m, &p, 3).unwrap();
            for (row, &y) in m.values.iter_rows().zip(&m.labels) {
                assert_eq!(u8::from(f.score_row(row) >= 0.5), y);
            }
        }
    }

    #[test]
    fn pure_labels_score_exactly() {
        let mut m = xor(5);
        m.labels.iter_mut().for_each(|y| *y = 1);
        let f = fit(&m, &ForestParams::default(), 0).unwrap();
        for row in m.values.iter_rows() {
            assert_eq!(f.score_row(row), 1.0);
        }
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn same_seed_same_forest() {
        let m = xor(10);
        let p = ForestParams {
            n_trees: 8,
            ..ForestParams::default()
        };
        assert_eq!(fit(&m, &p, 11).unwrap(), fit(&m, &p, 11).unwrap());
    }

    #[test]
    fn depth_limit_respected() {
        let rows: Vec<[f64; 1]> = (0..64).map(|i| [i as f64]).collect();
        let y = (0..64).map(|i| (i % 2) as u8).collect();
        let m = FeatureMatrix::unnamed(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let p = ForestParams {
            max_depth: 3,
            n_trees: 4,
            ..ForestParams::default()
        };
        let f = fit(&m, &p, 0).unwrap();
        assert!(f.trees.iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn importances_favour_informative_column() {
        let rows: Vec<[f64; 2]> = (0..200).map(|i| [(i % 7) as f64, (i % 2) as f64]).collect();
        let y = (0..200).map(|i| (i % 2) as u8).collect();
        let m = FeatureMatrix::unnamed(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let f = fit(
            &m,
            &ForestParams {
                n_trees: 10,
                ..ForestParams::default()
            },
            1,
        )
        .unwrap();
        assert!(f.feature_importances[1] > f.feature_importances[0]);
        assert!((f.feature_importances.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
