use ecobench_core::dataset::{generate_synthetic, validate, ValidationPolicy};
use ecobench_core::linalg::symmetric_eigen;
use ecobench_core::matrix::{squared_distance, Matrix};
use ecobench_core::preprocess::{
    apply_scaler, encode, engineer_features, fit_scaler, pca_fit, pca_transform, smote, stratified_split, FeatureMatrix,
};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    // cheap deterministic pseudo-random fill with correlated columns
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let base = next();
        for c in 0..cols {
            data.push(base * (c as f64 + 1.0) + next());
        }
    }
    Matrix::from_vec(rows, cols, data).unwrap()
}

#[test]
fn eigenvalues_agree_with_nalgebra() {
    for (d, seed) in [(3, 1), (8, 2), (17, 3), (22, 4)] {
        let x = matrix(60, d, seed);
        let mut cov = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let (ci, cj) = (x.column(i), x.column(j));
                let (mi, mj) = (ci.iter().sum::<f64>() / 60.0, cj.iter().sum::<f64>() / 60.0);
                let v = ci.iter().zip(&cj).map(|(a, b)| (a - mi) * (b - mj)).sum::<f64>() / 60.0;
                cov.set(i, j, v);
            }
        }
        // symmetrise exactly
        for i in 0..d {
            for j in 0..i {
                let v = cov.get(i, j);
                cov.set(j, i, v);
            }
        }
        let ours = symmetric_eigen(&cov).unwrap();
        let na = nalgebra::DMatrix::from_row_slice(d, d, cov.as_slice());
        let mut theirs: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.values.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-10 * theirs[0].abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn pca_contract_on_correlated_data() {
    let m = FeatureMatrix::unnamed(matrix(300, 12, 9), vec![0; 300]).unwrap();
    let p = pca_fit(&m, 0.9).unwrap();
    let k = p.n_components();
    let total = p.total_variance();
    assert!(p.spectrum[..k].iter().sum::<f64>() / total >= 0.9);
    assert!(p.spectrum[..k - 1].iter().sum::<f64>() / total < 0.9);
    for a in 0..k {
        for b in 0..k {
            let dotp: f64 = (0..12).map(|i| p.components.get(i, a) * p.components.get(i, b)).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((dotp - want).abs() < 1e-8);
        }
    }
    let z = pca_transform(&p, &m).unwrap();
    let mse: f64 = m
        .values
        .iter_rows()
        .zip(z.values.iter_rows())
        .map(|(x, zr)| squared_distance(x, &p.reconstruct(zr)))
        .sum::<f64>()
        / 300.0;
    assert!((mse - p.discarded_variance()).abs() < 1e-6);
}

/// Exhaustive SMOTE geometry check: each synthetic row lies on a segment
/// from a minority row to one of its k nearest minority neighbours.
fn synthetic_rows_on_segments(original: &FeatureMatrix, out: &FeatureMatrix, k: usize) -> bool {
    let counts = original.class_counts();
    let minority_class = u8::from(counts[1] < counts[0]);
    let minority: Vec<usize> = (0..original.rows())
        .filter(|&i| original.labels[i] == minority_class)
        .collect();
    let k = k.min(minority.len() - 1);
    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .map(|&a| {
            let mut others: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| (squared_distance(original.values.row(a), original.values.row(b)), b))
                .collect();
            others.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            others.into_iter().take(k).map(|(_, b)| b).collect()
        })
        .collect();
    (original.rows()..out.rows()).all(|s| {
        let p = out.values.row(s);
        out.labels[s] == minority_class
            && minority.iter().zip(&neighbours).any(|(&a, nb)| {
                nb.iter().any(|&b| {
                    let (xa, xb) = (original.values.row(a), original.values.row(b));
                    let dir: Vec<f64> = xa.iter().zip(xb).map(|(u, v)| v - u).collect();
                    let len2: f64 = dir.iter().map(|v| v * v).sum();
                    if len2 == 0.0 {
                        return squared_distance(p, xa).sqrt() < 1e-9;
                    }
                    let lam = p
                        .iter()
                        .zip(xa)
                        .zip(&dir)
                        .map(|((pi, ai), di)| (pi - ai) * di)
                        .sum::<f64>()
                        / len2;
                    let proj: Vec<f64> = xa.iter().zip(&dir).map(|(ai, di)| ai + lam * di).collect();
                    (-1e-9..=1.0 + 1e-9).contains(&lam) && squared_distance(p, &proj).sqrt() < 1e-9
                })
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smote_balances_and_interpolates(n_min in 3usize..25, n_maj in 30usize..80, seed in 0u64..1000) {
        let n = n_min + n_maj;
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_min)).collect();
        let m = FeatureMatrix::unnamed(matrix(n, 4, seed), labels).unwrap();
        let out = smote(&m, 5, seed).unwrap();
        let c = out.class_counts();
        prop_assert_eq!(c[0], c[1]);
        prop_assert_eq!(&out.values.as_slice()[..n * 4], m.values.as_slice());
        prop_assert!(synthetic_rows_on_segments(&m, &out, 5));
    }

    #[test]
    fn split_preserves_class_proportions(n in 40usize..400, frac in 0.1f64..0.5, seed in 0u64..1000) {
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 4 == 0)).collect();
        let m = FeatureMatrix::unnamed(matrix(n, 2, seed), labels).unwrap();
        let s = stratified_split(&m, frac, seed).unwrap();
        prop_assert_eq!(s.train.rows() + s.test.rows(), n);
        let mut all: Vec<usize> = s.train_rows.iter().chain(&s.test_rows).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for c in 0..2 {
            let total = m.class_counts()[c] as f64;
            prop_assert!((s.test.class_counts()[c] as f64 - total * frac).abs() <= 1.0);
        }
    }

    #[test]
    fn scaler_standardises_training_columns(seed in 0u64..1000) {
        let m = FeatureMatrix::unnamed(matrix(50, 3, seed), vec![0; 50]).unwrap();
        let s = apply_scaler(&m, &fit_scaler(&m).unwrap()).unwrap();
        for c in 0..3 {
            let col = s.values.column(c);
            let mean = col.iter().sum::<f64>() / 50.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 50.0;
            prop_assert!(mean.abs() < 1e-12);
            prop_assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generated_data_always_validates(n in 10usize..300, frac in 0.05f64..0.5, signal in 0.0f64..3.0, seed in 0u64..10_000) {
        let ds = generate_synthetic(n, frac, signal, seed).unwrap();
        let (_, report) = validate(&ds, ValidationPolicy::Reject).unwrap();
        prop_assert_eq!(report.total_violations(), 0);
        let (m, _) = encode(&engineer_features(&ds), false).unwrap();
        prop_assert!(m.values.all_finite());
    }
}
