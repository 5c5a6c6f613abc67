use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Family, HpValue};
use crate::rng::KeyedRng;

/// One sampled assignment of hyperparameters.
pub type Config = BTreeMap<String, HpValue>;

/// Sampling rule for a single hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    /// Uniform over the inclusive integer range.
    Int {
        lo: i64,
        hi: i64,
    },
    /// Uniform over `[lo, hi)`.
    Real {
        lo: f64,
        hi: f64,
    },
    /// `exp` of a uniform over `[ln lo, ln hi)`.
    LogUniform {
        lo: f64,
        hi: f64,
    },
    Choice {
        values: Vec<HpValue>,
    },
}

impl Sampler {
    fn validate(&self, key: &str) -> Result<()> {
        let ok = match self {
            Sampler::Int { lo, hi } => lo <= hi,
            Sampler::Real { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
            Sampler::LogUniform { lo, hi } => *lo > 0.0 && lo < hi && hi.is_finite(),
            Sampler::Choice { values } => !values.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "empty or invalid search range for `{key}`: {self:?}"
            )))
        }
    }

    fn sample(&self, rng: &mut KeyedRng) -> HpValue {
        match self {
            Sampler::Int { lo, hi } => HpValue::Int(rng.random_range(*lo..=*hi)),
            Sampler::Real { lo, hi } => HpValue::Real(rng.random_range(*lo..*hi)),
            Sampler::LogUniform { lo, hi } => HpValue::Real(rng.random_range(lo.ln()..hi.ln()).exp()),
            Sampler::Choice { values } => values[rng.random_range(0..values.len())].clone(),
        }
    }

    /// Whether `v` could have been drawn by this rule.
    pub fn contains(&self, v: &HpValue) -> bool {
        match (self, v) {
            (Sampler::Int { lo, hi }, HpValue::Int(x)) => lo <= x && x <= hi,
            (Sampler::Real { lo, hi }, HpValue::Real(x)) => lo <= x && x < hi,
            (Sampler::LogUniform { lo, hi }, HpValue::Real(x)) => lo * (1.0 - 1e-12) <= *x && *x <= hi * (1.0 + 1e-12),
            (Sampler::Choice { values }, v) => values.contains(v),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: BTreeMap<String, Sampler>,
}

impl SearchSpace {
    pub fn with(mut self, key: &str, sampler: Sampler) -> Self {
        self.params.insert(key.to_string(), sampler);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Parameter("search space is empty".into()));
        }
        self.params.iter().try_for_each(|(k, s)| s.validate(k))
    }

    /// Draws one configuration; keys are sampled in sorted order.
    pub fn sample(&self, rng: &mut KeyedRng) -> Config {
        self.params.iter().map(|(k, s)| (k.clone(), s.sample(rng))).collect()
    }

    pub fn contains(&self, c: &Config) -> bool {
        c.len() == self.params.len() && self.params.iter().all(|(k, s)| c.get(k).is_some_and(|v| s.contains(v)))
    }

    /// Every configuration of a space made only of categorical choices, in
    /// lexicographic order of the sorted keys; `None` if any rule is a range.
    pub fn grid(&self) -> Option<Vec<Config>> {
        let mut out = vec![Config::new()];
        for (k, s) in &self.params {
            let Sampler::Choice { values } = s else {
                return None;
            };
            out = out
                .iter()
                .flat_map(|c| {
                    values.iter().map(move |v| {
                        let mut c = c.clone();
                        c.insert(k.clone(), v.clone());
                        c
                    })
                })
                .collect();
        }
        Some(out)
    }
}

/// Default ranges bracketing the usual library defaults. Only the tree
/// ensembles have one; other families need an explicit space.
pub fn default_space(family: Family) -> Option<SearchSpace> {
    match family {
        Family::RandomForest => Some(
            SearchSpace::default()
                .with("n_trees", Sampler::Int { lo: 50, hi: 300 })
                .with("max_depth", Sampler::Int { lo: 4, hi: 20 })
                .with("min_samples_split", Sampler::Int { lo: 2, hi: 10 }),
        ),
        Family::Gbt => Some(
            SearchSpace::default()
                .with("eta", Sampler::LogUniform { lo: 0.01, hi: 0.3 })
                .with("max_depth", Sampler::Int { lo: 2, hi: 8 })
                .with("n_rounds", Sampler::Int { lo: 50, hi: 300 }),
        ),
        _ => None,
    }
}
