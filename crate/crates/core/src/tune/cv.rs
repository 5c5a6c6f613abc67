use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::{Config, SearchSpace};
use crate::analysis::classification_report;
use crate::error::{Error, Result};
use crate::models::{train, Hyperparams};
use crate::preprocess::{apply_scaler, fit_scaler, FeatureMatrix, Smote};
use crate::rng::{keyed_rng, TAG_FOLD, TAG_SEARCH};

pub const CV_CSV: &str = "cv_results.csv";

/// Fold assignment with per-class balance.
///
/// Each class is shuffled on its own stream and dealt round-robin; the
/// dealing position carries over from one class to the next so overall fold
/// sizes also differ by at most one.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be at least 2, got {k}")));
    }
    let mut folds = vec![0; y.len()];
    let mut offset = 0;
    for class in [0_u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.len() < k {
            return Err(Error::Stratification(format!(
                "class {class} has {} member(s), fewer than k = {k}",
                idx.len()
            )));
        }
        idx.shuffle(&mut keyed_rng(&[TAG_FOLD, seed, u64::from(class)]));
        for (pos, i) in idx.iter().enumerate() {
            folds[*i] = (offset + pos) % k;
        }
        offset = (offset + idx.len()) % k;
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSettings {
    pub k: usize,
    /// Neighbours used by SMOTE inside each training fold; 0 disables it.
    pub smote_k: usize,
    pub seed: u64,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            k: 5,
            smote_k: 5,
            seed: 0,
        }
    }
}

/// Scaled (and oversampled) training fold plus the scaled evaluation fold.
/// Scaler and SMOTE only ever see the training rows.
pub fn prepare_fold(
    data: &FeatureMatrix,
    folds: &[usize],
    fold: usize,
    cv: &CvSettings,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let train_rows: Vec<usize> = (0..data.rows()).filter(|&i| folds[i] != fold).collect();
    let eval_rows: Vec<usize> = (0..data.rows()).filter(|&i| folds[i] == fold).collect();
    let train = data.select_rows(&train_rows);
    let eval = data.select_rows(&eval_rows);
    let scaler = fit_scaler(&train)?;
    let mut train = apply_scaler(&train, &scaler)?;
    let eval = apply_scaler(&eval, &scaler)?;
    if cv.smote_k > 0 {
        train = Smote::new(cv.smote_k, cv.seed ^ fold as u64).apply(&train)?;
    }
    Ok((train, eval))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Position in sampling order, from 0.
    pub iter: usize,
    pub hyperparams: Hyperparams,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
    /// 1 is best.
    pub rank: usize,
    /// Set when training failed on some fold; the configuration then scores 0.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Hyperparams,
    pub best_index: usize,
    pub results: Vec<CvResult>,
}

fn evaluate_one(data: &FeatureMatrix, folds: &[usize], hp: &Hyperparams, cv: &CvSettings) -> Result<Vec<f64>> {
    (0..cv.k)
        .into_par_iter()
        .map(|fold| {
            let (train_fold, eval_fold) = prepare_fold(data, folds, fold, cv)?;
            let model = train(&train_fold, hp)?;
            let pred = model.predict_default(&eval_fold.values)?;
            Ok(classification_report(&eval_fold.labels, &pred)?.f1)
        })
        .collect()
}

/// Scores each configuration (applied over `base`) by mean out-of-fold F1
/// on the same folds, and ranks them. Ties keep the earlier configuration
/// ahead.
pub fn evaluate_configs(
    base: &Hyperparams,
    configs: &[Config],
    data: &FeatureMatrix,
    cv: &CvSettings,
) -> Result<Vec<CvResult>> {
    let folds = stratified_kfold(&data.labels, cv.k, cv.seed)?;
    let mut results: Vec<CvResult> = configs
        .iter()
        .enumerate()
        .map(|(iter, c)| {
            let mut hp = base.clone();
            hp.values.extend(c.iter().map(|(k, v)| (k.clone(), v.clone())));
            let (fold_f1, failure) = match evaluate_one(data, &folds, &hp, cv) {
                Ok(f) => (f, None),
                Err(e) => (vec![0.0; cv.k], Some(e.to_string())),
            };
            let mean_f1 = fold_f1.iter().sum::<f64>() / fold_f1.len() as f64;
            CvResult {
                iter,
                hyperparams: hp,
                fold_f1,
                mean_f1,
                rank: 0,
                failure,
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| results[b].mean_f1.total_cmp(&results[a].mean_f1).then(a.cmp(&b)));
    for (rank, i) in order.into_iter().enumerate() {
        results[i].rank = rank + 1;
    }
    Ok(results)
}

/// Randomized search: `n_iter` configurations from the seeded stream, each
/// cross-validated on identical folds.
pub fn random_search(
    base: &Hyperparams,
    space: &SearchSpace,
    data: &FeatureMatrix,
    n_iter: usize,
    cv: &CvSettings,
) -> Result<SearchOutcome> {
    if n_iter == 0 {
        return Err(Error::Parameter("n_iter must be at least 1".into()));
    }
    space.validate()?;
    let mut rng = keyed_rng(&[TAG_SEARCH, cv.seed]);
    let configs: Vec<Config> = (0..n_iter).map(|_| space.sample(&mut rng)).collect();
    // reject typos in the space before spending time on folds
    let mut probe = base.clone();
    probe.values.extend(configs[0].clone());
    probe.validate()?;

    let results = evaluate_configs(base, &configs, data, cv)?;
    let best_index = results.iter().position(|r| r.rank == 1).expect("non-empty");
    Ok(SearchOutcome {
        best: results[best_index].hyperparams.clone(),
        best_index,
        results,
    })
}

/// Writes `cv_results.csv`: iter, hyperparams, fold_f1s, mean_f1, rank.
pub fn write_cv_csv(results: &[CvResult], dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(CV_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["iter", "hyperparams", "fold_f1s", "mean_f1", "rank"])?;
    for r in results {
        let folds: Vec<String> = r.fold_f1.iter().map(f64::to_string).collect();
        w.write_record([
            r.iter.to_string(),
            r.hyperparams.canonical()?,
            folds.join(";"),
            r.mean_f1.to_string(),
            r.rank.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::models::{Family, HpValue};
    use crate::rng::keyed_rng;
    use crate::tune::space::Sampler;
    use rand::Rng;

    #[test]
    fn kfold_examples() {
        let y = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let f = stratified_kfold(&y, 5, 3).unwrap();
        for fold in 0..5 {
            let members: Vec<usize> = (0..10).filter(|&i| f[i] == fold).collect();
            assert_eq!(members.len(), 2);
            assert_eq!(members.iter().filter(|&&i| y[i] == 1).count(), 1);
        }
        assert_eq!(f, stratified_kfold(&y, 5, 3).unwrap());
        assert!(matches!(
            stratified_kfold(&[0, 0, 0, 1], 2, 0),
            Err(Error::Stratification(_))
        ));
        assert!(stratified_kfold(&y, 1, 0).is_err());
    }

    #[test]
    fn kfold_balance_uneven() {
        let y: Vec<u8> = (0..103).map(|i| u8::from(i % 4 == 0)).collect();
        let f = stratified_kfold(&y, 5, 1).unwrap();
        for class in [0, 1] {
            let sizes: Vec<usize> = (0..5)
                .map(|k| (0..y.len()).filter(|&i| y[i] == class && f[i] == k).count())
                .collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        let totals: Vec<usize> = (0..5).map(|k| f.iter().filter(|&&v| v == k).count()).collect();
        assert!(totals.iter().max().unwrap() - totals.iter().min().unwrap() <= 1);
    }

    /// Noisy two-moons-ish ring data: positives inside a ring.
    fn ring(n: usize, seed: u64) -> FeatureMatrix {
        let mut rng = keyed_rng(&[seed, 77]);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let noisy = rng.random::<f64>() < 0.1;
            let inside = (a * a + b * b).sqrt() < 1.2;
            y.push(u8::from(inside != noisy));
            rows.push([a, b, rng.random::<f64>()]);
        }
        FeatureMatrix::unnamed(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    #[test]
    fn single_iteration_returns_its_sample() {
        let data = ring(120, 1);
        let base = Hyperparams::new(Family::RandomForest, 3);
        let space = SearchSpace::default().with("n_trees", Sampler::Int { lo: 5, hi: 10 });
        let cv = CvSettings {
            k: 3,
            smote_k: 3,
            seed: 2,
        };
        let out = random_search(&base, &space, &data, 1, &cv).unwrap();
        assert_eq!(out.results.len(), 1);
        assert_eq!(out.best_index, 0);
        assert_eq!(out.results[0].rank, 1);
        assert!(space.params["n_trees"].contains(&out.best.values["n_trees"]));
        let again = random_search(&base, &space, &data, 1, &cv).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn more_trees_win_on_noisy_nonlinear_data() {
        let data = ring(300, 2);
        let base = Hyperparams::new(Family::RandomForest, 9);
        let space = SearchSpace::default().with(
            "n_trees",
            Sampler::Choice {
                values: vec![HpValue::Int(1), HpValue::Int(100)],
            },
        );
        let cv = CvSettings {
            k: 5,
            smote_k: 5,
            seed: 4,
        };
        let grid = evaluate_configs(&base, &space.grid().unwrap(), &data, &cv).unwrap();
        assert!(
            grid[1].mean_f1 > grid[0].mean_f1,
            "{} vs {}",
            grid[1].mean_f1,
            grid[0].mean_f1
        );
        let out = random_search(&base, &space, &data, 8, &cv).unwrap();
        assert_eq!(out.best.values["n_trees"], HpValue::Int(100));
        let best = out.results[out.best_index].mean_f1;
        assert!(out.results.iter().all(|r| r.mean_f1 <= best));
        assert_eq!(best, grid[1].mean_f1);
    }

    #[test]
    fn failed_configuration_scores_zero() {
        let data = ring(60, 3);
        let base = Hyperparams::new(Family::Gbt, 0);
        let configs = vec![
            Config::from([("max_depth".to_string(), HpValue::Int(1000))]),
            Config::from([("n_rounds".to_string(), HpValue::Int(5))]),
        ];
        let cv = CvSettings {
            k: 3,
            smote_k: 0,
            seed: 0,
        };
        let r = evaluate_configs(&base, &configs, &data, &cv).unwrap();
        assert!(r[0].failure.is_some());
        assert_eq!(r[0].mean_f1, 0.0);
        assert!(r[1].failure.is_none());
    }

    #[test]
    fn evaluation_rows_never_reach_smote() {
        let data = ring(90, 5);
        let cv = CvSettings {
            k: 3,
            smote_k: 5,
            seed: 8,
        };
        let folds = stratified_kfold(&data.labels, 3, cv.seed).unwrap();
        let (clean_train, _) = prepare_fold(&data, &folds, 0, &cv).unwrap();
        let mut poisoned = data.clone();
        for i in (0..data.rows()).filter(|&i| folds[i] == 0) {
            poisoned.values.row_mut(i).iter_mut().for_each(|v| *v = 1e6);
        }
        let (dirty_train, dirty_eval) = prepare_fold(&poisoned, &folds, 0, &cv).unwrap();
        assert_eq!(clean_train, dirty_train);
        assert!(dirty_eval.values.as_slice().iter().any(|v| v.abs() > 1e3));
    }

    #[test]
    fn cv_csv_rows() {
        let data = ring(60, 6);
        let base = Hyperparams::new(Family::Gbt, 0);
        let space = SearchSpace::default().with("n_rounds", Sampler::Int { lo: 3, hi: 6 });
        let out = random_search(
            &base,
            &space,
            &data,
            2,
            &CvSettings {
                k: 3,
                smote_k: 0,
                seed: 1,
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = write_cv_csv(&out.results, dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "iter,hyperparams,fold_f1s,mean_f1,rank");
        assert_eq!(text.lines().count(), 3);
    }
}
