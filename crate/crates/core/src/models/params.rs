use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(rename = "logreg")]
    LogReg,
    RandomForest,
    Gbt,
    IsolationForest,
    SvmRbf,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::LogReg,
        Family::RandomForest,
        Family::Gbt,
        Family::IsolationForest,
        Family::SvmRbf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::LogReg => "logreg",
            Family::RandomForest => "random_forest",
            Family::Gbt => "gbt",
            Family::IsolationForest => "isolation_forest",
            Family::SvmRbf => "svm_rbf",
        }
    }

    /// Whether training consumes labels.
    pub fn is_supervised(self) -> bool {
        self != Family::IsolationForest
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown model family `{s}`")))
    }
}

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HpValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl HpValue {
    fn as_f64(&self, key: &str) -> Result<f64> {
        match self {
            HpValue::Int(v) => Ok(*v as f64),
            HpValue::Real(v) => Ok(*v),
            HpValue::Text(t) => Err(Error::Parameter(format!("`{key}` must be numeric, got {t:?}"))),
        }
    }

    fn as_count(&self, key: &str) -> Result<usize> {
        match self {
            HpValue::Int(v) if *v >= 0 => Ok(*v as usize),
            HpValue::Real(v) if *v >= 0.0 && v.fract() == 0.0 && v.is_finite() => Ok(*v as usize),
            other => Err(Error::Parameter(format!(
                "`{key}` must be a non-negative integer, got {other}"
            ))),
        }
    }
}

impl fmt::Display for HpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HpValue::Int(v) => write!(f, "{v}"),
            HpValue::Real(v) => write!(f, "{v}"),
            HpValue::Text(t) => f.write_str(t),
        }
    }
}

impl From<i64> for HpValue {
    fn from(v: i64) -> Self {
        HpValue::Int(v)
    }
}

impl From<f64> for HpValue {
    fn from(v: f64) -> Self {
        HpValue::Real(v)
    }
}

impl From<&str> for HpValue {
    fn from(v: &str) -> Self {
        HpValue::Text(v.to_string())
    }
}

impl HpValue {
    /// Parses `"3"` as an integer, `"0.1"` as a real, anything else as text.
    pub fn parse(s: &str) -> Self {
        if let Ok(i) = s.parse::<i64>() {
            HpValue::Int(i)
        } else if let Ok(r) = s.parse::<f64>() {
            HpValue::Real(r)
        } else {
            HpValue::Text(s.to_string())
        }
    }
}

/// Family tag, user overrides and seed. Keys not overridden take the family
/// defaults; unknown keys and out-of-range values are rejected when the
/// typed parameters are resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub family: Family,
    #[serde(default)]
    pub values: BTreeMap<String, HpValue>,
    pub seed: u64,
}

impl Hyperparams {
    pub fn new(family: Family, seed: u64) -> Self {
        Self {
            family,
            values: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<HpValue>) -> Self {
        self.values.insert(key.to_string(), value.into());
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<HpValue>) {
        self.values.insert(key.to_string(), value.into());
    }

    /// Checks keys and ranges for the family.
    pub fn validate(&self) -> Result<()> {
        self.resolved().map(|_| ())
    }

    /// Every parameter of the family with defaults filled in.
    pub fn resolved(&self) -> Result<BTreeMap<String, HpValue>> {
        Ok(match self.family {
            Family::LogReg => LogRegParams::from_hp(self)?.to_map(),
            Family::RandomForest => ForestParams::from_hp(self)?.to_map(),
            Family::Gbt => GbtParams::from_hp(self)?.to_map(),
            Family::IsolationForest => IsolationParams::from_hp(self)?.to_map(),
            Family::SvmRbf => SvmParams::from_hp(self)?.to_map(),
        })
    }

    /// `key=value;key=value` over the resolved parameters, keys sorted.
    pub fn canonical(&self) -> Result<String> {
        Ok(self
            .resolved()?
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";"))
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Parameter(format!(
                "unknown hyperparameter `{k}` for {}; expected one of {}",
                self.family,
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        self.values.get(key).map_or(Ok(default), |v| v.as_f64(key))
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        self.values.get(key).map_or(Ok(default), |v| v.as_count(key))
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Parameter(msg()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

impl LogRegParams {
    pub fn from_hp(hp: &Hyperparams) -> Result<Self> {
        hp.check_keys(&["learning_rate", "epochs", "l2"])?;
        let d = Self::default();
        let p = Self {
            learning_rate: hp.real("learning_rate", d.learning_rate)?,
            epochs: hp.count("epochs", d.epochs)?,
            l2: hp.real("l2", d.l2)?,
        };
        require(p.learning_rate > 0.0 && p.learning_rate.is_finite(), || {
            format!("learning_rate must be positive, got {}", p.learning_rate)
        })?;
        require(p.l2 >= 0.0 && p.l2.is_finite(), || {
            format!("l2 must be >= 0, got {}", p.l2)
        })?;
        Ok(p)
    }

    fn to_map(&self) -> BTreeMap<String, HpValue> {
        BTreeMap::from([
            ("learning_rate".into(), HpValue::Real(self.learning_rate)),
            ("epochs".into(), HpValue::Int(self.epochs as i64)),
            ("l2".into(), HpValue::Real(self.l2)),
        ])
    }
}

/// Number of candidate features examined per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (d as f64).log2().floor() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, d.max(1))
    }

    fn to_value(self) -> HpValue {
        match self {
            MaxFeatures::Sqrt => "sqrt".into(),
            MaxFeatures::Log2 => "log2".into(),
            MaxFeatures::All => "all".into(),
            MaxFeatures::Count(k) => HpValue::Int(k as i64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 12,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

/// Node ids are heap positions in a `u64`.
pub(crate) const MAX_TREE_DEPTH: usize = 60;

impl ForestParams {
    pub fn from_hp(hp: &Hyperparams) -> Result<Self> {
        hp.check_keys(&["n_trees", "max_depth", "min_samples_split", "max_features"])?;
        let d = Self::default();
        let max_features = match hp.values.get("max_features") {
            None => d.max_features,
            Some(HpValue::Text(t)) => match t.as_str() {
                "sqrt" => MaxFeatures::Sqrt,
                "log2" => MaxFeatures::Log2,
                "all" => MaxFeatures::All,
                other => return Err(Error::Parameter(format!("unknown max_features `{other}`"))),
            },
            Some(v) => MaxFeatures::Count(v.as_count("max_features")?),
        };
        let p = Self {
            n_trees: hp.count("n_trees", d.n_trees)?,
            max_depth: hp.count("max_depth", d.max_depth)?,
            min_samples_split: hp.count("min_samples_split", d.min_samples_split)?,
            max_features,
        };
        require(p.n_trees >= 1, || "n_trees must be >= 1".into())?;
        require((1..=MAX_TREE_DEPTH).contains(&p.max_depth), || {
            format!("max_depth must lie in [1, {MAX_TREE_DEPTH}], got {}", p.max_depth)
        })?;
        require(p.min_samples_split >= 2, || {
            format!("min_samples_split must be >= 2, got {}", p.min_samples_split)
        })?;
        require(p.max_features != MaxFeatures::Count(0), || {
            "max_features must be >= 1".into()
        })?;
        Ok(p)
    }

    fn to_map(&self) -> BTreeMap<String, HpValue> {
        BTreeMap::from([
            ("n_trees".into(), HpValue::Int(self.n_trees as i64)),
            ("max_depth".into(), HpValue::Int(self.max_depth as i64)),
            ("min_samples_split".into(), HpValue::Int(self.min_samples_split as i64)),
            ("max_features".into(), self.max_features.to_value()),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub eta: f64,
    pub max_depth: usize,
    pub n_rounds: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            eta: 0.1,
            max_depth: 3,
            n_rounds: 100,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

impl GbtParams {
    pub fn from_hp(hp: &Hyperparams) -> Result<Self> {
        hp.check_keys(&["eta", "max_depth", "n_rounds", "lambda", "min_child_weight"])?;
        let d = Self::default();
        let p = Self {
            eta: hp.real("eta", d.eta)?,
            max_depth: hp.count("max_depth", d.max_depth)?,
            n_rounds: hp.count("n_rounds", d.n_rounds)?,
            lambda: hp.real("lambda", d.lambda)?,
            min_child_weight: hp.real("min_child_weight", d.min_child_weight)?,
        };
        require(p.eta > 0.0 && p.eta.is_finite(), || {
            format!("eta must be positive, got {}", p.eta)
        })?;
        require((1..=MAX_TREE_DEPTH).contains(&p.max_depth), || {
            format!("max_depth must lie in [1, {MAX_TREE_DEPTH}], got {}", p.max_depth)
        })?;
        require(p.lambda >= 0.0 && p.lambda.is_finite(), || {
            format!("lambda must be >= 0, got {}", p.lambda)
        })?;
        require(p.min_child_weight >= 0.0, || {
            format!("min_child_weight must be >= 0, got {}", p.min_child_weight)
        })?;
        Ok(p)
    }

    fn to_map(&self) -> BTreeMap<String, HpValue> {
        BTreeMap::from([
            ("eta".into(), HpValue::Real(self.eta)),
            ("max_depth".into(), HpValue::Int(self.max_depth as i64)),
            ("n_rounds".into(), HpValue::Int(self.n_rounds as i64)),
            ("lambda".into(), HpValue::Real(self.lambda)),
            ("min_child_weight".into(), HpValue::Real(self.min_child_weight)),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationParams {
    pub n_trees: usize,
    pub subsample: usize,
    /// Fraction of training points labelled anomalous; when absent the
    /// training label rate is used, or a 0.5 score cut without labels.
    pub contamination: Option<f64>,
}

impl Default for IsolationParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            subsample: 256,
            contamination: None,
        }
    }
}

impl IsolationParams {
    pub fn from_hp(hp: &Hyperparams) -> Result<Self> {
        hp.check_keys(&["n_trees", "subsample", "contamination"])?;
        let d = Self::default();
        let contamination = match hp.values.get("contamination") {
            None => None,
            Some(HpValue::Text(t)) if t == "auto" => None,
            Some(v) => Some(v.as_f64("contamination")?),
        };
        let p = Self {
            n_trees: hp.count("n_trees", d.n_trees)?,
            subsample: hp.count("subsample", d.subsample)?,
            contamination,
        };
        require(p.n_trees >= 1, || "n_trees must be >= 1".into())?;
        require(p.subsample >= 2, || {
            format!("subsample must be >= 2, got {}", p.subsample)
        })?;
        if let Some(c) = p.contamination {
            require(c > 0.0 && c < 1.0, || {
                format!("contamination must lie in (0, 1), got {c}")
            })?;
        }
        Ok(p)
    }

    fn to_map(&self) -> BTreeMap<String, HpValue> {
        BTreeMap::from([
            ("n_trees".into(), HpValue::Int(self.n_trees as i64)),
            ("subsample".into(), HpValue::Int(self.subsample as i64)),
            (
                "contamination".into(),
                self.contamination.map_or(HpValue::Text("auto".into()), HpValue::Real),
            ),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// `1 / (d * Var(X))` over all entries of the training matrix.
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Gamma,
    pub tol: f64,
    pub max_passes: usize,
    /// Hard cap on sweeps over the training set.
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: Gamma::Scale,
            tol: 1e-3,
            max_passes: 10,
            max_iter: 1000,
        }
    }
}

impl SvmParams {
    pub fn from_hp(hp: &Hyperparams) -> Result<Self> {
        hp.check_keys(&["C", "gamma", "tol", "max_passes", "max_iter"])?;
        let d = Self::default();
        let gamma = match hp.values.get("gamma") {
            None => d.gamma,
            Some(HpValue::Text(t)) if t == "scale" => Gamma::Scale,
            Some(v) => Gamma::Value(v.as_f64("gamma")?),
        };
        let p = Self {
            c: hp.real("C", d.c)?,
            gamma,
            tol: hp.real("tol", d.tol)?,
            max_passes: hp.count("max_passes", d.max_passes)?,
            max_iter: hp.count("max_iter", d.max_iter)?,
        };
        require(p.c > 0.0 && p.c.is_finite(), || {
            format!("C must be positive, got {}", p.c)
        })?;
        if let Gamma::Value(g) = p.gamma {
            require(g > 0.0 && g.is_finite(), || format!("gamma must be positive, got {g}"))?;
        }
        require(p.tol > 0.0, || format!("tol must be positive, got {}", p.tol))?;
        require(p.max_passes >= 1, || "max_passes must be >= 1".into())?;
        require(p.max_iter >= 1, || "max_iter must be >= 1".into())?;
        Ok(p)
    }

    fn to_map(&self) -> BTreeMap<String, HpValue> {
        BTreeMap::from([
            ("C".into(), HpValue::Real(self.c)),
            (
                "gamma".into(),
                match self.gamma {
                    Gamma::Scale => HpValue::Text("scale".into()),
                    Gamma::Value(g) => HpValue::Real(g),
                },
            ),
            ("tol".into(), HpValue::Real(self.tol)),
            ("max_passes".into(), HpValue::Int(self.max_passes as i64)),
            ("max_iter".into(), HpValue::Int(self.max_iter as i64)),
        ])
    }
}
