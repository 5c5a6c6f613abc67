//! Stratified cross-validation, randomized hyperparameter search and the
//! PCA-versus-full-features comparison.

mod cv;
mod experiment;
mod space;

pub use cv::{
    evaluate_configs, prepare_fold, random_search, stratified_kfold, write_cv_csv, CvResult, CvSettings, SearchOutcome,
    CV_CSV,
};
pub use experiment::{pca_pipeline_experiment, tracked_run, PcaComparison, TrackedRun};
pub use space::{default_space, Config, Sampler, SearchSpace};
