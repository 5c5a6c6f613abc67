//! The five baseline detectors behind one contract: every fitted model maps
//! a feature row to a score in `[0, 1]`, and `predict` labels a row anomalous
//! when its score reaches the threshold.

pub mod forest;
pub mod gbt;
pub mod iforest;
pub mod logreg;
mod params;
pub mod platt;
pub mod svm;
pub mod tree;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::FeatureMatrix;

pub use params::{
    Family, ForestParams, Gamma, GbtParams, HpValue, Hyperparams, IsolationParams, LogRegParams, MaxFeatures, SvmParams,
};
pub use platt::{calibrate_platt, Platt};

/// Fitted parameters per family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedParams {
    #[serde(rename = "logreg")]
    LogReg(logreg::LogisticModel),
    RandomForest(forest::RandomForest),
    Gbt(gbt::GradientBoosted),
    IsolationForest(iforest::IsolationForest),
    SvmRbf(svm::SvmModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub family: Family,
    pub n_features: usize,
    pub hyperparams: Hyperparams,
    pub params: FittedParams,
    pub platt: Option<Platt>,
    /// Threshold used when the caller does not pick one: 0.5, or the
    /// contamination cut for isolation forests.
    pub default_threshold: f64,
}

const FORMAT_TAG: &str = "ecobench-model";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    format: String,
    version: u32,
    model: M,
}

impl TrainedModel {
    fn check_dims(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(Error::shape(format!("{} features", self.n_features), x.cols()));
        }
        Ok(())
    }

    fn score_row(&self, x: &[f64]) -> f64 {
        let s = match &self.params {
            FittedParams::LogReg(m) => m.score_row(x),
            FittedParams::RandomForest(m) => m.score_row(x),
            FittedParams::Gbt(m) => m.score_row(x),
            FittedParams::IsolationForest(m) => m.score_row(x),
            FittedParams::SvmRbf(m) => {
                let raw = m.decision_value(x);
                match self.platt {
                    Some(p) => p.apply(raw),
                    None => logreg::sigmoid(raw),
                }
            }
        };
        s.clamp(0.0, 1.0)
    }

    /// Anomaly scores in `[0, 1]`, one per row.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        Ok(x.iter_rows().map(|r| self.score_row(r)).collect())
    }

    /// 1 where `score >= threshold`.
    pub fn predict(&self, x: &Matrix, threshold: f64) -> Result<Vec<u8>> {
        Ok(self.score(x)?.into_iter().map(|s| u8::from(s >= threshold)).collect())
    }

    pub fn predict_default(&self, x: &Matrix) -> Result<Vec<u8>> {
        self.predict(x, self.default_threshold)
    }

    /// Writes the model as versioned JSON; reals round-trip exactly.
    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        let env = Envelope {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            model: self,
        };
        serde_json::to_writer(writer, &env)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        let env: Envelope<TrainedModel> = serde_json::from_reader(reader)?;
        if env.format != FORMAT_TAG {
            return Err(Error::ModelFormat(format!("unexpected format tag `{}`", env.format)));
        }
        if env.version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {}", env.version)));
        }
        Ok(env.model)
    }
}

pub fn train_logreg(train: &FeatureMatrix, hp: &Hyperparams) -> Result<TrainedModel> {
    expect_family(hp, Family::LogReg)?;
    let p = LogRegParams::from_hp(hp)?;
    let m = logreg::fit(&train.values, &train.labels, &p)?;
    Ok(wrap(train, hp, FittedParams::LogReg(m), None, 0.5))
}

pub fn train_random_forest(train: &FeatureMatrix, hp: &Hyperparams) -> Result<TrainedModel> {
    expect_family(hp, Family::RandomForest)?;
    let p = ForestParams::from_hp(hp)?;
    let m = forest::fit(train, &p, hp.seed)?;
    Ok(wrap(train, hp, FittedParams::RandomForest(m), None, 0.5))
}

pub fn train_gbt(train: &FeatureMatrix, hp: &Hyperparams) -> Result<TrainedModel> {
    expect_family(hp, Family::Gbt)?;
    let p = GbtParams::from_hp(hp)?;
    let m = gbt::fit(train, &p)?;
    Ok(wrap(train, hp, FittedParams::Gbt(m), None, 0.5))
}

/// Labels are used only to pick the contamination cut when the
/// hyperparameters do not fix one.
pub fn train_isolation_forest(train: &FeatureMatrix, hp: &Hyperparams) -> Result<TrainedModel> {
    expect_family(hp, Family::IsolationForest)?;
    let p = IsolationParams::from_hp(hp)?;
    let m = iforest::fit(&train.values, &p, hp.seed)?;
    let contamination = p.contamination.or_else(|| {
        let frac = train.positive_fraction();
        (frac > 0.0 && frac < 1.0).then_some(frac)
    });
    let threshold = match contamination {
        Some(c) => {
            let scores: Vec<f64> = train.values.iter_rows().map(|r| m.score_row(r)).collect();
            iforest::contamination_threshold(&scores, c)
        }
        None => 0.5,
    };
    Ok(wrap(train, hp, FittedParams::IsolationForest(m), None, threshold))
}

/// Trains the SVM, then Platt-calibrates its decision values on the
/// training rows.
pub fn train_svm_rbf(train: &FeatureMatrix, hp: &Hyperparams) -> Result<TrainedModel> {
    expect_family(hp, Family::SvmRbf)?;
    let p = SvmParams::from_hp(hp)?;
    let m = svm::fit(&train.values, &train.labels, &p, hp.seed)?;
    let raw: Vec<f64> = train.values.iter_rows().map(|r| m.decision_value(r)).collect();
    let platt = calibrate_platt(&raw, &train.labels)?;
    Ok(wrap(train, hp, FittedParams::SvmRbf(m), Some(platt), 0.5))
}

/// Dispatches on `hp.family`.
pub fn train(train: &FeatureMatrix, hp: &Hyperparams) -> Result<TrainedModel> {
    match hp.family {
        Family::LogReg => train_logreg(train, hp),
        Family::RandomForest => train_random_forest(train, hp),
        Family::Gbt => train_gbt(train, hp),
        Family::IsolationForest => train_isolation_forest(train, hp),
        Family::SvmRbf => train_svm_rbf(train, hp),
    }
}

fn expect_family(hp: &Hyperparams, family: Family) -> Result<()> {
    if hp.family != family {
        return Err(Error::Parameter(format!(
            "hyperparameters are for {}, not {family}",
            hp.family
        )));
    }
    Ok(())
}

fn wrap(
    train: &FeatureMatrix,
    hp: &Hyperparams,
    params: FittedParams,
    platt: Option<Platt>,
    default_threshold: f64,
) -> TrainedModel {
    TrainedModel {
        family: hp.family,
        n_features: train.cols(),
        hyperparams: hp.clone(),
        params,
        platt,
        default_threshold,
    }
}
