//! Feature engineering, encoding, scaling, splitting, SMOTE and PCA.

mod encode;
mod pca;
mod scale;
mod smote;
mod split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use encode::{encode, engineer_features, DerivedFeatures, EngineeredDataset, LabelEncoding, ENGINEERED_COLUMNS};
pub use pca::{components_for_threshold, pca_fit, pca_transform, PcaModel};
pub use scale::{apply_scaler, fit_scaler, ScalerParams};
pub use smote::{smote, Lambda, Smote};
pub use split::{largest_remainder, stratified_split, SplitPair};

/// Numeric design matrix with aligned 0/1 labels and column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub labels: Vec<u8>,
    pub columns: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(values: Matrix, labels: Vec<u8>, columns: Vec<String>) -> Result<Self> {
        if values.rows() != labels.len() {
            return Err(Error::shape(format!("{} labels", values.rows()), labels.len()));
        }
        if values.cols() != columns.len() {
            return Err(Error::shape(format!("{} column names", values.cols()), columns.len()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::Schema(format!("duplicate column name `{dup}`")));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Data(format!("label {bad} is not 0/1")));
        }
        Ok(Self {
            values,
            labels,
            columns,
        })
    }

    /// Convenience constructor naming columns `x0, x1, ...`.
    pub fn unnamed(values: Matrix, labels: Vec<u8>) -> Result<Self> {
        let columns = (0..values.cols()).map(|i| format!("x{i}")).collect();
        Self::new(values, labels, columns)
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            columns: self.columns.clone(),
        }
    }

    /// Row indices per class, `[class 0, class 1]`, ascending.
    pub fn class_indices(&self) -> [Vec<usize>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for (i, &y) in self.labels.iter().enumerate() {
            out[usize::from(y)].push(i);
        }
        out
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&y| y == 1).count();
        [self.labels.len() - ones, ones]
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.class_counts()[1] as f64 / self.labels.len() as f64
        }
    }
}
