use rand::Rng;

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::matrix::squared_distance;
use crate::rng::{keyed_rng, TAG_SMOTE};

/// How the interpolation factor is chosen for each synthetic point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    /// Uniform in `[0, 1)` from the seeded stream.
    Random,
    /// Always this value; used to pin geometry in tests.
    Fixed(f64),
}

/// SMOTE oversampler for binary labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smote {
    pub k: usize,
    pub seed: u64,
    pub lambda: Lambda,
}

impl Smote {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            lambda: Lambda::Random,
        }
    }

    pub fn with_lambda(mut self, lambda: Lambda) -> Self {
        self.lambda = lambda;
        self
    }

    /// Returns the input rows unchanged, followed by synthetic minority rows
    /// until both classes have the majority count.
    pub fn apply(&self, train: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.k == 0 {
            return Err(Error::Parameter("SMOTE needs k >= 1".into()));
        }
        let counts = train.class_counts();
        let (minority_class, needed) = match counts[0].cmp(&counts[1]) {
            std::cmp::Ordering::Equal => return Ok(train.clone()),
            std::cmp::Ordering::Less => (0_u8, counts[1] - counts[0]),
            std::cmp::Ordering::Greater => (1_u8, counts[0] - counts[1]),
        };
        let minority = &train.class_indices()[usize::from(minority_class)];
        if minority.len() < 2 {
            return Err(Error::Smote(format!(
                "minority class {minority_class} has {} member(s); at least 2 are required",
                minority.len()
            )));
        }

        let neighbours = minority_neighbours(train, minority, self.k.min(minority.len() - 1));

        let mut out = train.clone();
        let mut rng = keyed_rng(&[TAG_SMOTE, self.seed]);
        let d = train.cols();
        let mut synthetic = vec![0.0; d];
        for _ in 0..needed {
            let base = rng.random_range(0..minority.len());
            let nn = neighbours[base][rng.random_range(0..neighbours[base].len())];
            let lambda = match self.lambda {
                Lambda::Random => rng.random::<f64>(),
                Lambda::Fixed(l) => l,
            };
            let x = train.values.row(minority[base]);
            let z = train.values.row(minority[nn]);
            for ((s, a), b) in synthetic.iter_mut().zip(x).zip(z) {
                *s = a + lambda * (b - a);
            }
            out.values.push_row(&synthetic)?;
            out.labels.push(minority_class);
        }
        Ok(out)
    }
}

/// `smote(train, k, seed)` with a random interpolation factor.
pub fn smote(train: &FeatureMatrix, k: usize, seed: u64) -> Result<FeatureMatrix> {
    Smote::new(k, seed).apply(train)
}

/// For each minority member (by position in `minority`), the positions of its
/// `k` nearest other minority members under Euclidean distance; ties resolve
/// to the lower position.
fn minority_neighbours(train: &FeatureMatrix, minority: &[usize], k: usize) -> Vec<Vec<usize>> {
    minority
        .iter()
        .enumerate()
        .map(|(i, &row_i)| {
            let x = train.values.row(row_i);
            let mut dist: Vec<(f64, usize)> = minority
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &row_j)| (squared_distance(x, train.values.row(row_j)), j))
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
            dist.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn matrix(rows: &[[f64; 2]], labels: Vec<u8>) -> FeatureMatrix {
        FeatureMatrix::unnamed(Matrix::from_rows(rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn balances_ten_four() {
        let rows: Vec<[f64; 2]> = (0..14).map(|i| [i as f64, (i * i) as f64]).collect();
        let labels = (0..14).map(|i| u8::from(i >= 10)).collect();
        let m = matrix(&rows, labels);
        let out = smote(&m, 5, 3).unwrap();
        assert_eq!(out.class_counts(), [10, 10]);
        assert_eq!(out.select_rows(&(0..14).collect::<Vec<_>>()), m);
    }

    #[test]
    fn midpoint_with_fixed_lambda() {
        let m = matrix(
            &[[5.0, 5.0], [6.0, 5.0], [7.0, 5.0], [0.0, 0.0], [1.0, 1.0]],
            vec![0, 0, 0, 1, 1],
        );
        let out = Smote::new(1, 0).with_lambda(Lambda::Fixed(0.5)).apply(&m).unwrap();
        assert_eq!(out.rows(), 6);
        assert_eq!(out.values.row(5), &[0.5, 0.5]);
        assert_eq!(out.labels[5], 1);
    }

    #[test]
    fn single_member_minority_fails() {
        let m = matrix(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![0, 0, 1]);
        assert!(matches!(smote(&m, 5, 0), Err(Error::Smote(_))));
    }

    #[test]
    fn balanced_input_unchanged() {
        let m = matrix(&[[0.0, 0.0], [1.0, 0.0]], vec![0, 1]);
        assert_eq!(smote(&m, 5, 0).unwrap(), m);
    }

    #[test]
    fn seed_deterministic() {
        let rows: Vec<[f64; 2]> = (0..30).map(|i| [(i as f64).sin(), (i as f64).cos()]).collect();
        let labels = (0..30).map(|i| u8::from(i % 5 == 0)).collect();
        let m = matrix(&rows, labels);
        assert_eq!(smote(&m, 3, 9).unwrap(), smote(&m, 3, 9).unwrap());
        assert_ne!(smote(&m, 3, 9).unwrap(), smote(&m, 3, 10).unwrap());
    }
}
