use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::matrix::{dot, Matrix};

/// Principal components retained from a covariance eigendecomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d x k`; column `j` is the `j`-th principal direction.
    pub components: Matrix,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Every eigenvalue of the covariance, descending, negatives clipped to 0.
    pub spectrum: Vec<f64>,
    pub retained_variance_ratio: f64,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.cols()
    }

    pub fn total_variance(&self) -> f64 {
        self.spectrum.iter().sum()
    }

    pub fn discarded_variance(&self) -> f64 {
        self.spectrum[self.n_components()..].iter().sum()
    }

    /// Maps scores back to feature space: `mean + z * components^T`.
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        (0..self.mean.len())
            .map(|i| self.mean[i] + dot(z, self.components.row(i)))
            .collect()
    }
}

/// Smallest `k` whose leading eigenvalues reach `threshold` of the total.
/// Relative rounding of 1e-12 is forgiven so that `threshold = 1` keeps every
/// component instead of failing on the last ulp.
pub fn components_for_threshold(eigenvalues: &[f64], threshold: f64) -> usize {
    let total: f64 = eigenvalues.iter().sum();
    let target = threshold * total * (1.0 - 1e-12);
    let mut cum = 0.0;
    for (i, ev) in eigenvalues.iter().enumerate() {
        cum += ev;
        if cum >= target {
            return i + 1;
        }
    }
    eigenvalues.len()
}

/// Fits PCA on the population covariance of `train` and keeps the smallest
/// number of components explaining at least `variance_threshold` of the
/// variance.
pub fn pca_fit(train: &FeatureMatrix, variance_threshold: f64) -> Result<PcaModel> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::Parameter(format!(
            "variance threshold must lie in (0, 1], got {variance_threshold}"
        )));
    }
    let n = train.rows();
    let d = train.cols();
    if n == 0 || d == 0 {
        return Err(Error::Degenerate("PCA needs at least one row and one column".into()));
    }
    let first = train.values.row(0);
    if train.values.iter_rows().all(|r| r == first) {
        return Err(Error::Degenerate(
            "all rows are identical; covariance has rank 0".into(),
        ));
    }

    let mut mean = vec![0.0; d];
    for row in train.values.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = Matrix::zeros(d, d);
    let mut centred = vec![0.0; d];
    for row in train.values.iter_rows() {
        for ((c, v), m) in centred.iter_mut().zip(row).zip(&mean) {
            *c = v - m;
        }
        for i in 0..d {
            for j in i..d {
                let v = cov.get(i, j) + centred[i] * centred[j];
                cov.set(i, j, v);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov.get(i, j) / n as f64;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }

    let eig = symmetric_eigen(&cov)?;
    let spectrum: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = spectrum.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("covariance has zero trace".into()));
    }
    let k = components_for_threshold(&spectrum, variance_threshold);
    let retained: f64 = spectrum[..k].iter().sum();
    let idx: Vec<usize> = (0..k).collect();

    Ok(PcaModel {
        mean,
        components: eig.vectors.select_cols(&idx),
        eigenvalues: spectrum[..k].to_vec(),
        retained_variance_ratio: retained / total,
        spectrum,
    })
}

/// Projects rows onto the retained components: `(x - mean) * components`.
pub fn pca_transform(p: &PcaModel, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let d = p.mean.len();
    if m.cols() != d {
        return Err(Error::shape(format!("{d} columns"), m.cols()));
    }
    let k = p.n_components();
    let mut data = Vec::with_capacity(m.rows() * k);
    let mut centred = vec![0.0; d];
    for row in m.values.iter_rows() {
        for ((c, v), mu) in centred.iter_mut().zip(row).zip(&p.mean) {
            *c = v - mu;
        }
        for j in 0..k {
            data.push((0..d).map(|i| centred[i] * p.components.get(i, j)).sum());
        }
    }
    let columns = (1..=k).map(|j| format!("pc{j}")).collect();
    FeatureMatrix::new(Matrix::from_vec(m.rows(), k, data)?, m.labels.clone(), columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_on_known_spectrum() {
        // cumulative ratios 4/6, 5/6, 5.5/6
        assert_eq!(components_for_threshold(&[4.0, 1.0, 0.5, 0.5], 0.9), 3);
        assert_eq!(components_for_threshold(&[4.0, 1.0, 0.5, 0.5], 0.8), 2);
        assert_eq!(components_for_threshold(&[4.0, 1.0, 0.5, 0.5], 1.0), 4);
    }

    #[test]
    fn isotropic_ten_dims_keeps_nine() {
        // +-sqrt(10) e_i: zero mean, identity covariance
        let s = 10f64.sqrt();
        let mut rows = Vec::new();
        for i in 0..10 {
            for sign in [1.0, -1.0] {
                let mut r = vec![0.0; 10];
                r[i] = sign * s;
                rows.push(r);
            }
        }
        let m = FeatureMatrix::unnamed(Matrix::from_rows(&rows).unwrap(), vec![0; 20]).unwrap();
        let p = pca_fit(&m, 0.9).unwrap();
        assert_eq!(p.n_components(), 9);
    }

    #[test]
    fn one_dimensional_is_centering() {
        let rows = [[1.0], [3.0], [8.0]];
        let m = FeatureMatrix::unnamed(Matrix::from_rows(&rows).unwrap(), vec![0, 1, 0]).unwrap();
        let p = pca_fit(&m, 0.9).unwrap();
        assert_eq!(p.n_components(), 1);
        let z = pca_transform(&p, &m).unwrap();
        let sign = p.components.get(0, 0);
        assert_eq!(sign.abs(), 1.0);
        for (zi, xi) in z.values.column(0).iter().zip([1.0, 3.0, 8.0]) {
            assert!((zi * sign - (xi - 4.0)).abs() < 1e-12);
        }
        assert_eq!(z.labels, vec![0, 1, 0]);
    }

    #[test]
    fn identical_rows_are_degenerate() {
        let m = FeatureMatrix::unnamed(Matrix::from_rows(&[[1.0, 2.0]; 4]).unwrap(), vec![0; 4]).unwrap();
        assert!(matches!(pca_fit(&m, 0.9), Err(Error::Degenerate(_))));
    }
}
