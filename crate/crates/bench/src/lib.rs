//! Shared fixtures for the benchmarks.

use ecobench_core::dataset::SyntheticSpec;
use ecobench_core::preprocess::{
    apply_scaler, encode, engineer_features, fit_scaler, smote, stratified_split, FeatureMatrix,
};

/// Scaled, oversampled training rows and scaled test rows of a synthetic
/// benchmark dataset with `n` flows.
pub fn fixture(n: usize, seed: u64) -> (FeatureMatrix, FeatureMatrix) {
    let ds = SyntheticSpec::new(n, 0.25, 1.0, seed)
        .with_interaction(true)
        .generate()
        .expect("valid synthetic spec");
    let (m, _) = encode(&engineer_features(&ds), false).expect("synthetic data encodes");
    let split = stratified_split(&m, 0.2, seed).expect("both classes present");
    let scaler = fit_scaler(&split.train).expect("non-empty train");
    let train = apply_scaler(&split.train, &scaler).expect("same columns");
    let test = apply_scaler(&split.test, &scaler).expect("same columns");
    (smote(&train, 5, seed).expect("minority has neighbours"), test)
}
