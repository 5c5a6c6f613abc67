//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Matrix,
}

/// Cyclic Jacobi sweeps until the off-diagonal mass falls below
/// `1e-22 * ||A||_F^2` or 100 sweeps elapse.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape("square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    for i in 0..n {
        for j in 0..i {
            let (x, y) = (a.get(i, j), a.get(j, i));
            if (x - y).abs() > 1e-9 * (1.0 + x.abs().max(y.abs())) {
                return Err(Error::Numeric(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    if !a.all_finite() {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }

    let mut m = a.clone();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let frob: f64 = m.as_slice().iter().map(|x| x * x).sum();
    let tol = 1e-22 * frob.max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).powi(2))
            .sum();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let vectors = v.select_cols(&order);
    Ok(SymmetricEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        let v0 = e.vectors.column(0);
        assert!((v0[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((v0[0] - v0[1]).abs() < 1e-12);
    }

    #[test]
    fn diagonal_untouched() {
        let a = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 3.0]]).unwrap();
        let e = symmetric_eigen(&a).unwrap();
        assert_eq!(e.values, vec![5.0, 3.0, 1.0]);
    }

    #[test]
    fn asymmetric_rejected() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(symmetric_eigen(&a).is_err());
    }
}
