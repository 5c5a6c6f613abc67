//! Classification metrics, ROC-AUC and the exploratory statistics written
//! next to every benchmark run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, CATEGORICAL_COLUMNS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> ClassificationMetrics {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if self.tp == 0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassificationMetrics {
            accuracy: ratio(self.tp + self.tn, self.total()),
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-model evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub train_duration_s: f64,
    pub infer_duration_s: f64,
}

impl MetricsRow {
    pub fn new(model: impl Into<String>, m: ClassificationMetrics, roc_auc: f64) -> Self {
        Self {
            model: model.into(),
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            roc_auc,
            train_duration_s: 0.0,
            infer_duration_s: 0.0,
        }
    }
}

fn check_binary(y: &[u8], what: &str) -> Result<()> {
    match y.iter().find(|&&v| v > 1) {
        Some(v) => Err(Error::Data(format!("{what} contains non-binary value {v}"))),
        None => Ok(()),
    }
}

/// Class 1 (anomaly) is the positive class.
pub fn confusion_counts(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(format!("{} predictions", y_true.len()), y_pred.len()));
    }
    check_binary(y_true, "y_true")?;
    check_binary(y_pred, "y_pred")?;
    let mut c = ConfusionCounts::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (1, 0) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

/// Accuracy, precision, recall and F1, with 0/0 taken as 0.
pub fn classification_report(y_true: &[u8], y_pred: &[u8]) -> Result<ClassificationMetrics> {
    Ok(confusion_counts(y_true, y_pred)?.metrics())
}

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
///
/// Computed from average ranks in O(n log n).
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::shape(format!("{} scores", y_true.len()), scores.len()));
    }
    check_binary(y_true, "y_true")?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("scores contain NaN".into()));
    }
    let n_pos = y_true.iter().filter(|&&y| y == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("ROC-AUC needs both classes in y_true".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // ranks doubled so tie groups average to integers
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg2 = (i + 1 + j + 1) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| y_true[k] == 1).count() as u128;
        pos_rank_sum2 += avg2 * pos_in_group;
        i = j + 1;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    let u2 = pos_rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

/// Five-number summary plus mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub column: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between order statistics
/// (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(column: &str, values: &[f64]) -> Result<ColumnSummary> {
    if values.is_empty() {
        return Err(Error::Data(format!("column `{column}` is empty")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mean, std) = mean_std(values);
    Ok(ColumnSummary {
        column: column.to_string(),
        count: values.len(),
        mean,
        std,
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Summaries of every numeric column in canonical order.
pub fn summary_stats(ds: &Dataset) -> Result<Vec<ColumnSummary>> {
    if ds.is_empty() {
        return Err(Error::Data("cannot summarise an empty dataset".into()));
    }
    ds.numeric_columns()
        .iter()
        .map(|(name, v)| summarize(name, v))
        .collect()
}

/// Pearson correlation; 0 when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub columns: Vec<String>,
    pub values: Matrix,
}

/// Correlation matrix over the numeric columns. Each off-diagonal pair is
/// computed once and mirrored so the result is exactly symmetric.
pub fn pearson_matrix(ds: &Dataset) -> Result<Correlation> {
    if ds.len() < 2 {
        return Err(Error::Data("correlation needs at least two rows".into()));
    }
    let cols = ds.numeric_columns();
    let d = cols.len();
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        let constant = cols[i].1.iter().all(|v| *v == cols[i].1[0]);
        m.set(i, i, if constant { 0.0 } else { 1.0 });
        for j in 0..i {
            let r = pearson(&cols[i].1, &cols[j].1);
            m.set(i, j, r);
            m.set(j, i, r);
        }
    }
    Ok(Correlation {
        columns: cols.iter().map(|(n, _)| n.to_string()).collect(),
        values: m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedStat {
    pub column: String,
    pub normal_mean: f64,
    pub normal_std: f64,
    pub anomaly_mean: f64,
    pub anomaly_std: f64,
}

/// Per-class means and standard deviations of every numeric column except
/// the label itself.
pub fn grouped_stats(ds: &Dataset) -> Result<Vec<GroupedStat>> {
    let labels = ds.labels();
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::Data("grouped statistics need both classes".into()));
    }
    Ok(ds
        .numeric_columns()
        .into_iter()
        .filter(|(name, _)| *name != "status")
        .map(|(name, values)| {
            let (normal, anomaly): (Vec<_>, Vec<_>) = values.iter().zip(&labels).partition(|(_, &y)| y == 0);
            let normal: Vec<f64> = normal.into_iter().map(|(v, _)| *v).collect();
            let anomaly: Vec<f64> = anomaly.into_iter().map(|(v, _)| *v).collect();
            let (normal_mean, normal_std) = mean_std(&normal);
            let (anomaly_mean, anomaly_std) = mean_std(&anomaly);
            GroupedStat {
                column: name.to_string(),
                normal_mean,
                normal_std,
                anomaly_mean,
                anomaly_std,
            }
        })
        .collect())
}

/// Counts of each categorical token per class: `(column, token) -> [normal, anomaly]`.
pub fn categorical_counts(ds: &Dataset) -> BTreeMap<(String, String), [usize; 2]> {
    let mut out = BTreeMap::new();
    for r in &ds.records {
        for col in CATEGORICAL_COLUMNS {
            let token = r.categorical(col).unwrap_or_default().to_string();
            let entry: &mut [usize; 2] = out.entry((col.to_string(), token)).or_default();
            entry[usize::from(r.is_anomaly())] += 1;
        }
    }
    out
}

/// Column pairs emitted raw for scatter plots of traffic against energy.
pub const SCATTER_COLUMNS: [&str; 5] = [
    "payload_entropy",
    "avg_pkt_size",
    "power_consumption_watts",
    "carbon_emission_gCO2eq",
    "status",
];

/// Writes `summary.csv`, `correlation.csv`, `grouped_by_status.csv`,
/// `categorical_counts.csv` and `scatter_pairs.csv` into `dir`.
pub fn write_eda(ds: &Dataset, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["column", "count", "mean", "std", "min", "q1", "median", "q3", "max"])?;
    for s in summary_stats(ds)? {
        let nums = [s.mean, s.std, s.min, s.q1, s.median, s.q3, s.max].map(|v| v.to_string());
        w.write_record([s.column, s.count.to_string()].into_iter().chain(nums))?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("correlation.csv");
    let corr = pearson_matrix(ds)?;
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(std::iter::once("column").chain(corr.columns.iter().map(String::as_str)))?;
    for (i, name) in corr.columns.iter().enumerate() {
        w.write_record(std::iter::once(name.clone()).chain(corr.values.row(i).iter().map(|v| v.to_string())))?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("grouped_by_status.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["column", "normal_mean", "normal_std", "anomaly_mean", "anomaly_std"])?;
    for g in grouped_stats(ds)? {
        w.write_record([
            g.column,
            g.normal_mean.to_string(),
            g.normal_std.to_string(),
            g.anomaly_mean.to_string(),
            g.anomaly_std.to_string(),
        ])?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("categorical_counts.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["column", "token", "normal", "anomaly"])?;
    for ((col, token), [normal, anomaly]) in categorical_counts(ds) {
        w.write_record([col, token, normal.to_string(), anomaly.to_string()])?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("scatter_pairs.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(SCATTER_COLUMNS)?;
    let cols: Vec<Vec<f64>> = SCATTER_COLUMNS
        .iter()
        .map(|c| ds.numeric_column(c).expect("scatter columns are numeric"))
        .collect();
    for i in 0..ds.len() {
        w.write_record(cols.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()?;
    written.push(path);

    Ok(written)
}
