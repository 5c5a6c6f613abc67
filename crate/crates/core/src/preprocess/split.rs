use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng::{keyed_rng, TAG_SPLIT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPair {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    /// Input row indices of each part, ascending.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
}

/// Distributes `round(sum(shares))` units over classes: floors first, then
/// one extra unit to each of the largest fractional remainders. Ties go to
/// the lower class index.
pub fn largest_remainder(shares: &[f64]) -> Vec<usize> {
    let total = shares.iter().sum::<f64>().round() as usize;
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Stratified train/test split. Per-class test counts follow
/// [`largest_remainder`] over `class_count * test_fraction`; which rows go to
/// test is decided by a shuffle keyed on `seed` alone. Row order within each
/// part follows the input.
pub fn stratified_split(m: &FeatureMatrix, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let classes = m.class_indices();
    for (c, idx) in classes.iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {c} has {} member(s); at least 2 are required",
                idx.len()
            )));
        }
    }
    let shares: Vec<f64> = classes.iter().map(|c| c.len() as f64 * test_fraction).collect();
    let test_counts = largest_remainder(&shares);

    let mut test_rows = Vec::new();
    let mut train_rows = Vec::new();
    for (c, idx) in classes.iter().enumerate() {
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut keyed_rng(&[TAG_SPLIT, seed, c as u64]));
        test_rows.extend_from_slice(&shuffled[..test_counts[c]]);
        train_rows.extend_from_slice(&shuffled[test_counts[c]..]);
    }
    test_rows.sort_unstable();
    train_rows.sort_unstable();

    Ok(SplitPair {
        train: m.select_rows(&train_rows),
        test: m.select_rows(&test_rows),
        train_rows,
        test_rows,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn labelled(labels: Vec<u8>) -> FeatureMatrix {
        let rows: Vec<[f64; 1]> = (0..labels.len()).map(|i| [i as f64]).collect();
        FeatureMatrix::unnamed(Matrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn thirty_of_hundred() {
        let labels = (0..100).map(|i| u8::from(i % 10 < 3)).collect();
        let s = stratified_split(&labelled(labels), 0.2, 7).unwrap();
        assert_eq!(s.test.rows(), 20);
        assert_eq!(s.test.class_counts(), [14, 6]);
        assert_eq!(s.train.rows(), 80);
    }

    #[test]
    fn five_five() {
        let labels = (0..10).map(|i| u8::from(i < 5)).collect();
        let s = stratified_split(&labelled(labels), 0.2, 1).unwrap();
        assert_eq!(s.test.class_counts(), [1, 1]);
    }

    #[test]
    fn deterministic_and_disjoint() {
        let labels: Vec<u8> = (0..57).map(|i| u8::from(i % 4 == 0)).collect();
        let m = labelled(labels);
        let a = stratified_split(&m, 0.3, 42).unwrap();
        let b = stratified_split(&m, 0.3, 42).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.train_rows.iter().chain(&a.test_rows).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
        // rows carry their index as the feature value
        assert_eq!(
            a.test.values.column(0),
            a.test_rows.iter().map(|&i| i as f64).collect::<Vec<_>>()
        );
    }

    #[test]
    fn tiny_class_rejected() {
        let mut labels = vec![0; 10];
        labels[0] = 1;
        assert!(matches!(
            stratified_split(&labelled(labels), 0.2, 1),
            Err(Error::Stratification(_))
        ));
    }

    #[test]
    fn remainder_ties_go_to_lower_class() {
        assert_eq!(largest_remainder(&[1.5, 1.5]), vec![2, 1]);
        assert_eq!(largest_remainder(&[14.0, 6.0]), vec![14, 6]);
        assert_eq!(largest_remainder(&[2.6, 1.2, 1.2]), vec![3, 1, 1]);
    }
}
