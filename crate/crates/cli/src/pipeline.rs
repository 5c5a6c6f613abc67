//! The benchmark pipeline behind the `bench`, `tune`, `synth`, `ingest` and
//! `eda` subcommands.

use std::collections::BTreeMap;

use ecobench_core::analysis::{confusion_counts, write_eda, ConfusionCounts};
use ecobench_core::dataset::{load_csv, validate, write_csv, Dataset};
use ecobench_core::eco::{self, pareto_front, rank_by_eei, write_eco_csv, EcoTable};
use ecobench_core::energy::write_carbon_csv;
use ecobench_core::models::{Family, HpValue, Hyperparams};
use ecobench_core::preprocess::{
    apply_scaler, encode, engineer_features, fit_scaler, pca_fit, pca_transform, smote, stratified_split, FeatureMatrix,
};
use ecobench_core::tune::{
    default_space, evaluate_configs, random_search, tracked_run, write_cv_csv, CvSettings, TrackedRun,
};
use ecobench_core::{EnergyReport, MetricsRow, ValidationReport};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, RunConfig};
use crate::error::{CliError, CliResult, StageExt};
use crate::output::{RunManifest, Staging};

pub const RESULTS_JSON: &str = "results.json";
pub const DATASET_CSV: &str = "dataset.csv";
pub const VALIDATION_JSON: &str = "validation_report.json";
pub const EDA_DIR: &str = "eda";

/// Everything in a run that is a pure function of the configuration and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deterministic {
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub dataset: DatasetInfo,
    pub features: Vec<String>,
    pub split: SplitInfo,
    pub models: Vec<ModelResult>,
    pub pca: Vec<PcaResult>,
    pub tuning: Option<TuneResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub source: String,
    pub input_rows: usize,
    pub rows: usize,
    pub anomalies: usize,
    pub violations: usize,
    pub dropped_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub train_rows: usize,
    pub test_rows: usize,
    /// `[normal, anomaly]`.
    pub train_counts: [usize; 2],
    pub test_counts: [usize; 2],
    pub smote_counts: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: String,
    pub family: Family,
    pub hyperparams: BTreeMap<String, HpValue>,
    pub training_rows: usize,
    pub n_features: usize,
    pub default_threshold: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub confusion: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub family: Family,
    pub n_components: usize,
    pub n_features: usize,
    pub retained_variance_ratio: f64,
    pub full_f1: f64,
    pub reduced_f1: f64,
    pub delta_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub family: Family,
    pub n_iter: usize,
    pub cv_folds: usize,
    pub best_iter: usize,
    pub best_hyperparams: BTreeMap<String, HpValue>,
    pub best_mean_f1: f64,
    /// The family defaults scored on the same folds.
    pub default_mean_f1: f64,
}

/// Durations, energy and everything derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub backend: String,
    pub carbon_intensity_g_per_kwh: f64,
    pub models: Vec<ModelMeasured>,
    pub eei_ranking: Vec<String>,
    pub pareto_front: Vec<String>,
    pub pca: Vec<PcaMeasured>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeasured {
    pub model: String,
    pub train_duration_s: f64,
    pub infer_duration_s: f64,
    pub train_energy_kwh: f64,
    pub infer_energy_kwh: f64,
    pub emissions_g: f64,
    pub eei: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaMeasured {
    pub family: Family,
    pub full_energy_kwh: f64,
    pub reduced_energy_kwh: f64,
    pub delta_energy_kwh: f64,
    pub full_train_s: f64,
    pub reduced_train_s: f64,
    pub delta_train_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub deterministic: Deterministic,
    pub measured: Measured,
}

impl Results {
    pub fn read(dir: &std::path::Path) -> CliResult<Self> {
        let path = dir.join(RESULTS_JSON);
        let text =
            std::fs::read_to_string(&path).map_err(|e| CliError::data("report", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::data("report", format!("{}: {e}", path.display())))
    }
}

/// Loads (or generates) and validates the configured dataset.
pub fn load_dataset(cfg: &RunConfig) -> CliResult<(Dataset, ValidationReport)> {
    let raw = match &cfg.dataset {
        DataSource::File { path, mapping } => load_csv(path, mapping).stage("load")?,
        DataSource::Synthetic(s) => cfg.synthetic_spec(s)?.generate().stage("load")?,
    };
    validate(&raw, cfg.validation_policy).stage("validate")
}

/// Matrices flowing into the models.
pub struct Prepared {
    pub features: Vec<String>,
    pub train_raw: FeatureMatrix,
    pub train_scaled: FeatureMatrix,
    pub test_scaled: FeatureMatrix,
    pub train_smote: FeatureMatrix,
}

impl Prepared {
    /// Isolation Forest is unsupervised and sees the real rows only.
    pub fn training_set(&self, family: Family) -> &FeatureMatrix {
        if family.is_supervised() {
            &self.train_smote
        } else {
            &self.train_scaled
        }
    }
}

pub fn prepare(cfg: &RunConfig, ds: &Dataset) -> CliResult<Prepared> {
    let seed = cfg.seed()?;
    let engineered = engineer_features(ds);
    let (matrix, _) = encode(&engineered, cfg.exclude_sustainability).stage("encode")?;
    let split = stratified_split(&matrix, cfg.test_fraction, seed).stage("split")?;
    let scaler = fit_scaler(&split.train).stage("scale")?;
    let train_scaled = apply_scaler(&split.train, &scaler).stage("scale")?;
    let test_scaled = apply_scaler(&split.test, &scaler).stage("scale")?;
    let train_smote = smote(&train_scaled, cfg.smote_k, seed).stage("smote")?;
    Ok(Prepared {
        features: matrix.columns.clone(),
        train_raw: split.train,
        train_scaled,
        test_scaled,
        train_smote,
    })
}

struct Collected {
    runs: Vec<(Family, TrackedRun, usize)>,
    pca: Vec<(PcaResult, PcaMeasured)>,
    tuning: Option<TuneResult>,
}

impl Collected {
    fn push(&mut self, family: Family, run: TrackedRun, training_rows: usize) {
        self.runs.push((family, run, training_rows));
    }

    fn get(&self, model: &str) -> Option<&TrackedRun> {
        self.runs
            .iter()
            .find(|(_, r, _)| r.metrics.model == model)
            .map(|(_, r, _)| r)
    }

    fn metrics(&self) -> Vec<MetricsRow> {
        self.runs.iter().map(|(_, r, _)| r.metrics.clone()).collect()
    }

    fn energy(&self) -> Vec<EnergyReport> {
        self.runs
            .iter()
            .flat_map(|(_, r, _)| [r.train_report.clone(), r.infer_report.clone()])
            .collect()
    }
}

fn run_model(
    cfg: &RunConfig,
    label: &str,
    hp: &Hyperparams,
    train: &FeatureMatrix,
    test: &FeatureMatrix,
) -> CliResult<TrackedRun> {
    tracked_run(label, hp, train, test, &cfg.tracker).stage(&format!("model:{label}"))
}

fn check_pca_models(cfg: &RunConfig) -> CliResult<()> {
    if cfg.pca_threshold.is_some() {
        if let Some(f) = cfg.pca_models.iter().find(|f| !cfg.models.contains(f)) {
            return Err(CliError::usage(
                "config",
                format!("PCA model `{f}` is not in the model list"),
            ));
        }
    }
    Ok(())
}

fn benchmark(cfg: &RunConfig, p: &Prepared, staging: &mut Staging) -> CliResult<Collected> {
    let mut out = Collected {
        runs: Vec::new(),
        pca: Vec::new(),
        tuning: None,
    };
    for &family in &cfg.models {
        let train = p.training_set(family);
        let run = run_model(cfg, family.name(), &cfg.hyperparams(family)?, train, &p.test_scaled)?;
        out.push(family, run, train.rows());
    }
    staging.stage_done("models");

    if let Some(threshold) = cfg.pca_threshold {
        for &family in &cfg.pca_models {
            let train = p.training_set(family);
            let stage = format!("pca:{family}");
            let pca = pca_fit(train, threshold).stage(&stage)?;
            let train_z = pca_transform(&pca, train).stage(&stage)?;
            let test_z = pca_transform(&pca, &p.test_scaled).stage(&stage)?;
            let label = format!("{family}_pca");
            let reduced = run_model(cfg, &label, &cfg.hyperparams(family)?, &train_z, &test_z)?;
            let full = out.get(family.name()).expect("PCA models are benchmarked");
            let det = PcaResult {
                family,
                n_components: pca.n_components(),
                n_features: train.cols(),
                retained_variance_ratio: pca.retained_variance_ratio,
                full_f1: full.metrics.f1,
                reduced_f1: reduced.metrics.f1,
                delta_f1: reduced.metrics.f1 - full.metrics.f1,
            };
            let measured = PcaMeasured {
                family,
                full_energy_kwh: full.total_energy_kwh(),
                reduced_energy_kwh: reduced.total_energy_kwh(),
                delta_energy_kwh: reduced.total_energy_kwh() - full.total_energy_kwh(),
                full_train_s: full.train_report.duration_s,
                reduced_train_s: reduced.train_report.duration_s,
                delta_train_s: reduced.train_report.duration_s - full.train_report.duration_s,
            };
            out.pca.push((det, measured));
            out.push(family, reduced, train_z.rows());
        }
        staging.stage_done("pca");
    }
    Ok(out)
}

fn tune(cfg: &RunConfig, p: &Prepared, staging: &mut Staging, out: &mut Collected) -> CliResult<()> {
    let t = &cfg.tune;
    let family = t.family;
    let space = match &t.space {
        Some(s) => s.clone(),
        None => default_space(family)
            .ok_or_else(|| CliError::usage("tune", format!("no default search space for {family}; set tune.space")))?,
    };
    let cv = CvSettings {
        k: t.cv_folds,
        smote_k: if family.is_supervised() { cfg.smote_k } else { 0 },
        seed: cfg.seed()?,
    };
    let base = cfg.hyperparams(family)?;
    let search = random_search(&base, &space, &p.train_raw, t.n_iter, &cv).stage("tune")?;
    let default = evaluate_configs(&base, &[Default::default()], &p.train_raw, &cv).stage("tune")?;
    write_cv_csv(&search.results, staging.dir()).stage("tune")?;
    let best = &search.results[search.best_index];
    let train = p.training_set(family);
    let label = format!("{family}_optimized");
    let run = run_model(cfg, &label, &search.best, train, &p.test_scaled)?;
    out.tuning = Some(TuneResult {
        family,
        n_iter: t.n_iter,
        cv_folds: t.cv_folds,
        best_iter: best.iter,
        best_hyperparams: search.best.resolved().stage("tune")?,
        best_mean_f1: best.mean_f1,
        default_mean_f1: default[0].mean_f1,
    });
    out.push(family, run, train.rows());
    staging.stage_done("tune");
    Ok(())
}

fn finish(
    command: &str,
    cfg: &RunConfig,
    ds: &Dataset,
    report: &ValidationReport,
    p: &Prepared,
    out: Collected,
    staging: &mut Staging,
) -> CliResult<Results> {
    write_eda(ds, &staging.dir().join(EDA_DIR)).stage("eda")?;
    staging.stage_done("eda");

    let energy = out.energy();
    let table: EcoTable = eco::merge(&out.metrics(), &energy, cfg.eps, cfg.energy_basis).stage("merge")?;
    write_carbon_csv(&energy, staging.dir()).stage("merge")?;
    write_eco_csv(&table, staging.dir()).stage("merge")?;
    staging.stage_done("eco");

    let mut models = Vec::new();
    let mut measured = Vec::new();
    for (family, run, training_rows) in &out.runs {
        let m = &run.metrics;
        models.push(ModelResult {
            model: m.model.clone(),
            family: *family,
            hyperparams: run.model.hyperparams.resolved().stage("results")?,
            training_rows: *training_rows,
            n_features: run.model.n_features,
            default_threshold: run.model.default_threshold,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            roc_auc: m.roc_auc,
            confusion: confusion_counts(&p.test_scaled.labels, &run.predictions).stage("results")?,
        });
        let row = table.get(&m.model).expect("every run is merged");
        measured.push(ModelMeasured {
            model: m.model.clone(),
            train_duration_s: run.train_report.duration_s,
            infer_duration_s: run.infer_report.duration_s,
            train_energy_kwh: row.train_energy_kwh,
            infer_energy_kwh: row.infer_energy_kwh,
            emissions_g: row.total_emissions_g,
            eei: row.eei,
        });
    }

    let results = Results {
        deterministic: Deterministic {
            command: command.into(),
            seed: cfg.seed()?,
            config: cfg.snapshot(),
            dataset: DatasetInfo {
                source: ds.source.to_string(),
                input_rows: report.input_rows,
                rows: ds.len(),
                anomalies: ds.anomaly_count(),
                violations: report.total_violations(),
                dropped_rows: report.dropped_rows.len(),
            },
            features: p.features.clone(),
            split: SplitInfo {
                train_rows: p.train_scaled.rows(),
                test_rows: p.test_scaled.rows(),
                train_counts: p.train_scaled.class_counts(),
                test_counts: p.test_scaled.class_counts(),
                smote_counts: p.train_smote.class_counts(),
            },
            models,
            pca: out.pca.iter().map(|(d, _)| d.clone()).collect(),
            tuning: out.tuning.clone(),
        },
        measured: Measured {
            backend: cfg.tracker.backend.to_string(),
            carbon_intensity_g_per_kwh: cfg.tracker.carbon_intensity_g_per_kwh,
            models: measured,
            eei_ranking: rank_by_eei(&table),
            pareto_front: pareto_front(&table.rows).into_iter().map(|r| r.model).collect(),
            pca: out.pca.iter().map(|(_, m)| m.clone()).collect(),
        },
    };
    staging.write_json(RESULTS_JSON, &results)?;
    staging.stage_done("results");
    Ok(results)
}

fn run_pipeline(cfg: &RunConfig, command: &str, with_tuning: bool) -> CliResult<RunManifest> {
    cfg.validate()?;
    check_pca_models(cfg)?;
    if with_tuning && cfg.tune.n_iter == 0 {
        return Err(CliError::usage("config", "tune.n_iter must be at least 1"));
    }
    let mut staging = Staging::begin(&output_dir(cfg))?;
    let (ds, report) = load_dataset(cfg)?;
    staging.stage_done("load");
    let p = prepare(cfg, &ds)?;
    staging.stage_done("preprocess");
    let mut out = benchmark(cfg, &p, &mut staging)?;
    if with_tuning {
        tune(cfg, &p, &mut staging, &mut out)?;
    }
    finish(command, cfg, &ds, &report, &p, out, &mut staging)?;
    staging.commit(command, cfg.snapshot())
}

/// validate → engineer → encode → split → scale → SMOTE → tracked models →
/// merge → eco table.
pub fn run_bench(cfg: &RunConfig) -> CliResult<RunManifest> {
    run_pipeline(cfg, "bench", false)
}

/// The bench pipeline plus a randomized search whose best configuration is
/// retrained under tracking as `<family>_optimized`.
pub fn run_tune(cfg: &RunConfig) -> CliResult<RunManifest> {
    run_pipeline(cfg, "tune", true)
}

/// Writes the configured synthetic dataset as CSV.
pub fn run_synth(cfg: &RunConfig) -> CliResult<RunManifest> {
    let DataSource::Synthetic(s) = &cfg.dataset else {
        return Err(CliError::usage("config", "synth needs a synthetic dataset source"));
    };
    let spec = cfg.synthetic_spec(s)?;
    let mut staging = Staging::begin(&output_dir(cfg))?;
    let ds = spec.generate().stage("synth")?;
    write_csv(&ds, staging.dir().join(DATASET_CSV)).stage("synth")?;
    staging.stage_done("synth");
    staging.commit("synth", cfg.snapshot())
}

/// Loads and validates a dataset, writing it back in canonical form with
/// the validation report.
pub fn run_ingest(cfg: &RunConfig) -> CliResult<RunManifest> {
    cfg.validate()?;
    let mut staging = Staging::begin(&output_dir(cfg))?;
    let (ds, report) = load_dataset(cfg)?;
    write_csv(&ds, staging.dir().join(DATASET_CSV)).stage("ingest")?;
    staging.write_json(VALIDATION_JSON, &report)?;
    staging.stage_done("ingest");
    staging.commit("ingest", cfg.snapshot())
}

/// Summary statistics, correlations and class-grouped statistics.
pub fn run_eda(cfg: &RunConfig) -> CliResult<RunManifest> {
    cfg.validate()?;
    let mut staging = Staging::begin(&output_dir(cfg))?;
    let (ds, _) = load_dataset(cfg)?;
    write_eda(&ds, &staging.dir().join(EDA_DIR)).stage("eda")?;
    staging.stage_done("eda");
    staging.commit("eda", cfg.snapshot())
}

pub const DEFAULT_OUT: &str = "ecobench_out";

pub fn output_dir(cfg: &RunConfig) -> std::path::PathBuf {
    cfg.out.clone().unwrap_or_else(|| DEFAULT_OUT.into())
}
