//! Run configuration: one JSON document plus command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ecobench_core::dataset::{ColumnMapping, SyntheticSpec};
use ecobench_core::eco::{EnergyBasis, DEFAULT_EPS};
use ecobench_core::energy::{BackendKind, TrackerConfig};
use ecobench_core::models::{Family, HpValue, Hyperparams};
use ecobench_core::tune::SearchSpace;
use ecobench_core::ValidationPolicy;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Synthetic generator settings; a missing seed falls back to the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub n: usize,
    pub anomaly_fraction: f64,
    pub signal_strength: f64,
    #[serde(default)]
    pub interaction: bool,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for SyntheticSource {
    fn default() -> Self {
        Self {
            n: 2300,
            anomaly_fraction: 0.25,
            signal_strength: 1.0,
            interaction: true,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    File {
        path: PathBuf,
        #[serde(default)]
        mapping: ColumnMapping,
    },
    Synthetic(SyntheticSource),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticSource::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub family: Family,
    pub n_iter: usize,
    pub cv_folds: usize,
    /// Replaces the family's default search space.
    pub space: Option<SearchSpace>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            family: Family::RandomForest,
            n_iter: 10,
            cv_folds: 5,
            space: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DataSource,
    pub validation_policy: ValidationPolicy,
    pub seed: Option<u64>,
    pub models: Vec<Family>,
    /// Per-family overrides of the default hyperparameters.
    pub hyperparams: BTreeMap<Family, BTreeMap<String, HpValue>>,
    pub tracker: TrackerConfig,
    pub eps: f64,
    pub energy_basis: EnergyBasis,
    pub test_fraction: f64,
    pub smote_k: usize,
    /// Enables the PCA comparison for `pca_models` when set.
    pub pca_threshold: Option<f64>,
    pub pca_models: Vec<Family>,
    pub exclude_sustainability: bool,
    pub tune: TuneConfig,
    /// Not part of the snapshot written to results.json.
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DataSource::default(),
            validation_policy: ValidationPolicy::Reject,
            seed: None,
            models: Family::ALL.to_vec(),
            hyperparams: BTreeMap::new(),
            tracker: TrackerConfig::default(),
            eps: DEFAULT_EPS,
            energy_basis: EnergyBasis::Total,
            test_fraction: 0.2,
            smote_k: 5,
            pca_threshold: None,
            pca_models: vec![Family::RandomForest],
            exclude_sustainability: false,
            tune: TuneConfig::default(),
            out: None,
        }
    }
}

/// Command-line values that win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub models: Option<Vec<Family>>,
    pub backend: Option<BackendKind>,
    pub carbon_intensity: Option<f64>,
    pub exclude_sustainability: bool,
    pub pca_threshold: Option<f64>,
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::usage("config", format!("invalid config: {e}")))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(models) = &o.models {
            self.models = models.clone();
        }
        if let Some(backend) = o.backend {
            self.tracker.backend = backend;
        }
        if let Some(ci) = o.carbon_intensity {
            self.tracker.carbon_intensity_g_per_kwh = ci;
        }
        if o.exclude_sustainability {
            self.exclude_sustainability = true;
        }
        if let Some(t) = o.pca_threshold {
            self.pca_threshold = Some(t);
        }
    }

    /// The mandatory run seed.
    pub fn seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::usage("config", "a seed is required (--seed N or \"seed\" in the config)"))
    }

    pub fn synthetic_spec(&self, s: &SyntheticSource) -> CliResult<SyntheticSpec> {
        Ok(SyntheticSpec {
            n: s.n,
            anomaly_fraction: s.anomaly_fraction,
            signal_strength: s.signal_strength,
            interaction: s.interaction,
            seed: match s.seed {
                Some(seed) => seed,
                None => self.seed()?,
            },
        })
    }

    pub fn hyperparams(&self, family: Family) -> CliResult<Hyperparams> {
        let mut hp = Hyperparams::new(family, self.seed()?);
        if let Some(values) = self.hyperparams.get(&family) {
            hp.values = values.clone();
        }
        hp.validate().map_err(|e| CliError::usage("config", e.to_string()))?;
        Ok(hp)
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: String| Err(CliError::usage("config", m));
        self.seed()?;
        if self.models.is_empty() {
            return usage("model list is empty".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.models.iter().find(|f| !seen.insert(**f)) {
            return usage(format!("model `{dup}` listed twice"));
        }
        for f in &self.models {
            self.hyperparams(*f)?;
        }
        self.tracker
            .validate()
            .map_err(|e| CliError::usage("config", e.to_string()))?;
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return usage(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return usage(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if let Some(t) = self.pca_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return usage(format!("pca threshold must lie in (0, 1], got {t}"));
            }
        }
        if let Some(path) = &self.tracker.trace_path {
            if self.tracker.backend == BackendKind::TraceReplay && !path.is_file() {
                return usage(format!("trace file {} does not exist", path.display()));
            }
        }
        if let DataSource::File { path, .. } = &self.dataset {
            if !path.is_file() {
                return Err(CliError::data(
                    "load",
                    format!("dataset {} does not exist", path.display()),
                ));
            }
        }
        Ok(())
    }

    /// Canonical JSON of everything that affects results; the output
    /// directory is left out so runs into different directories compare equal.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_value(&c).expect("config serializes")
    }
}
