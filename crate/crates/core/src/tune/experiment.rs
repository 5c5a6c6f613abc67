use serde::{Deserialize, Serialize};

use crate::analysis::{classification_report, roc_auc, MetricsRow};
use crate::energy::{track, EnergyReport, Phase, TrackerConfig};
use crate::error::Result;
use crate::models::{train, Hyperparams, TrainedModel};
use crate::preprocess::{pca_fit, pca_transform, FeatureMatrix};

/// A model trained and scored under energy tracking.
#[derive(Debug, Clone)]
pub struct TrackedRun {
    pub model: TrainedModel,
    pub scores: Vec<f64>,
    pub predictions: Vec<u8>,
    pub metrics: MetricsRow,
    pub train_report: EnergyReport,
    pub infer_report: EnergyReport,
}

impl TrackedRun {
    pub fn total_energy_kwh(&self) -> f64 {
        self.train_report.energy_kwh + self.infer_report.energy_kwh
    }
}

/// Trains on `train` and scores `test`, each phase under its own tracker.
/// Predictions use the model's default threshold.
pub fn tracked_run(
    label: &str,
    hp: &Hyperparams,
    train_set: &FeatureMatrix,
    test: &FeatureMatrix,
    cfg: &TrackerConfig,
) -> Result<TrackedRun> {
    let (model, train_report) = track(|| train(train_set, hp), cfg, label, Phase::Train)?;
    let model = model?;
    let (scores, infer_report) = track(|| model.score(&test.values), cfg, label, Phase::Inference)?;
    let scores = scores?;
    let predictions: Vec<u8> = scores.iter().map(|&s| u8::from(s >= model.default_threshold)).collect();
    let mut metrics = MetricsRow::new(
        label,
        classification_report(&test.labels, &predictions)?,
        roc_auc(&test.labels, &scores)?,
    );
    metrics.train_duration_s = train_report.duration_s;
    metrics.infer_duration_s = infer_report.duration_s;
    Ok(TrackedRun {
        model,
        scores,
        predictions,
        metrics,
        train_report,
        infer_report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaComparison {
    pub n_components: usize,
    pub n_features: usize,
    pub retained_variance_ratio: f64,
    pub full: (MetricsRow, EnergyReport, EnergyReport),
    pub reduced: (MetricsRow, EnergyReport, EnergyReport),
    /// Reduced minus full.
    pub delta_f1: f64,
    pub delta_energy_kwh: f64,
    pub delta_train_s: f64,
}

/// Trains `hp` on the full standardized features and on their PCA
/// projection (smallest k retaining `threshold` of the variance), tracking
/// both. PCA is fitted on `train` only.
///
/// The reduced run is labelled `<family>_pca`.
pub fn pca_pipeline_experiment(
    train_set: &FeatureMatrix,
    test: &FeatureMatrix,
    hp: &Hyperparams,
    threshold: f64,
    cfg: &TrackerConfig,
) -> Result<PcaComparison> {
    let pca = pca_fit(train_set, threshold)?;
    let train_z = pca_transform(&pca, train_set)?;
    let test_z = pca_transform(&pca, test)?;

    let name = hp.family.name();
    let full = tracked_run(name, hp, train_set, test, cfg)?;
    let reduced = tracked_run(&format!("{name}_pca"), hp, &train_z, &test_z, cfg)?;
    Ok(PcaComparison {
        n_components: pca.n_components(),
        n_features: train_set.cols(),
        retained_variance_ratio: pca.retained_variance_ratio,
        delta_f1: reduced.metrics.f1 - full.metrics.f1,
        delta_energy_kwh: reduced.total_energy_kwh() - full.total_energy_kwh(),
        delta_train_s: reduced.train_report.duration_s - full.train_report.duration_s,
        full: (full.metrics, full.train_report, full.infer_report),
        reduced: (reduced.metrics, reduced.train_report, reduced.infer_report),
    })
}
