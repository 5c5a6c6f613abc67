//! Energy-aware anomaly-detection benchmarking for flow-level network traffic.
//!
//! The crate is organised around the benchmark pipeline:
//!
//! - [`dataset`]: flow-record schema, CSV ingestion, validation and a seeded
//!   synthetic generator.
//! - [`preprocess`]: feature engineering, label encoding, scaling, stratified
//!   splitting, SMOTE and PCA.
//! - [`models`]: the five baseline detectors behind one score/predict contract.
//! - [`analysis`]: classification metrics, ROC-AUC and EDA statistics.
//! - [`energy`]: power sampling, energy integration and carbon accounting.
//! - [`eco`]: the eco-efficiency index, rankings and the Pareto front.
//! - [`tune`]: stratified cross-validation, random search and the PCA
//!   comparison experiment.

pub mod analysis;
pub mod dataset;
pub mod eco;
pub mod energy;
mod error;
pub mod linalg;
pub mod matrix;
pub mod models;
pub mod preprocess;
pub mod rng;
pub mod tune;

pub use analysis::{ClassificationMetrics, ConfusionCounts, MetricsRow};
pub use dataset::{Dataset, FlowRecord, ValidationPolicy, ValidationReport};
pub use eco::{EcoRow, EcoTable};
pub use energy::{EnergyReport, Phase, TrackerConfig};
pub use error::{Error, ErrorCategory, Result};
pub use matrix::Matrix;
pub use models::{Family, Hyperparams, TrainedModel};
pub use preprocess::{FeatureMatrix, SplitPair};
