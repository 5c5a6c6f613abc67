//! Eco-efficiency: detection quality per unit of energy, rankings and the
//! (F1, energy) Pareto front.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::MetricsRow;
use crate::energy::{EnergyReport, Phase};
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-12;

pub const ECO_CSV: &str = "eco_table.csv";
pub const ECO_CSV_HEADER: [&str; 10] = [
    "model",
    "accuracy",
    "f1",
    "roc_auc",
    "train_energy_kwh",
    "infer_energy_kwh",
    "total_energy_kwh",
    "total_emissions_g",
    "eei",
    "on_pareto_front",
];

/// Rows with F1 below this are flagged so a high index earned by near-zero
/// energy is not read as good detection.
pub const LOW_F1: f64 = 0.5;

/// Which energy the index divides by.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyBasis {
    #[default]
    Total,
    TrainOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcoRow {
    pub model: String,
    pub accuracy: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub train_energy_kwh: f64,
    pub infer_energy_kwh: f64,
    pub total_energy_kwh: f64,
    pub total_emissions_g: f64,
    pub eei: f64,
}

impl EcoRow {
    pub fn basis_energy(&self, basis: EnergyBasis) -> f64 {
        match basis {
            EnergyBasis::Total => self.total_energy_kwh,
            EnergyBasis::TrainOnly => self.train_energy_kwh,
        }
    }

    pub fn low_f1(&self) -> bool {
        self.f1 < LOW_F1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcoTable {
    pub rows: Vec<EcoRow>,
    pub eps: f64,
    pub basis: EnergyBasis,
}

impl EcoTable {
    pub fn get(&self, model: &str) -> Option<&EcoRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    /// Appends a row, recomputing its index under this table's settings.
    pub fn push(&mut self, mut row: EcoRow) -> Result<()> {
        if self.get(&row.model).is_some() {
            return Err(Error::Parameter(format!(
                "duplicate model `{}` in eco table",
                row.model
            )));
        }
        row.eei = eco_index(row.f1, row.basis_energy(self.basis), self.eps);
        self.rows.push(row);
        Ok(())
    }
}

/// `f1 / (energy_kwh + eps)`.
pub fn eco_index(f1: f64, energy_kwh: f64, eps: f64) -> f64 {
    f1 / (energy_kwh + eps)
}

/// Joins metrics with train and inference energy reports by model name.
/// Several reports for the same (model, phase) are summed.
pub fn merge(perf: &[MetricsRow], energy: &[EnergyReport], eps: f64, basis: EnergyBasis) -> Result<EcoTable> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    let mut table = EcoTable {
        rows: Vec::with_capacity(perf.len()),
        eps,
        basis,
    };
    for p in perf {
        let phase_total = |phase: Phase| -> Result<(f64, f64)> {
            let matching: Vec<&EnergyReport> = energy
                .iter()
                .filter(|r| r.label == p.model && r.phase == phase)
                .collect();
            if matching.is_empty() {
                return Err(Error::Join {
                    model: p.model.clone(),
                    phase: phase.to_string(),
                });
            }
            Ok(matching
                .iter()
                .fold((0.0, 0.0), |(e, g), r| (e + r.energy_kwh, g + r.emissions_g)))
        };
        let (train_e, train_g) = phase_total(Phase::Train)?;
        let (infer_e, infer_g) = phase_total(Phase::Inference)?;
        table.push(EcoRow {
            model: p.model.clone(),
            accuracy: p.accuracy,
            f1: p.f1,
            roc_auc: p.roc_auc,
            train_energy_kwh: train_e,
            infer_energy_kwh: infer_e,
            total_energy_kwh: train_e + infer_e,
            total_emissions_g: train_g + infer_g,
            eei: 0.0,
        })?;
    }
    Ok(table)
}

/// `a` dominates `b` when it is no worse on both axes and strictly better on one.
pub fn dominates(a: &EcoRow, b: &EcoRow) -> bool {
    a.f1 >= b.f1 && a.total_energy_kwh <= b.total_energy_kwh && (a.f1 > b.f1 || a.total_energy_kwh < b.total_energy_kwh)
}

/// Rows not dominated under (maximise F1, minimise total energy), by
/// ascending energy then model name.
pub fn pareto_front(rows: &[EcoRow]) -> Vec<EcoRow> {
    let mut sorted: Vec<&EcoRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.total_energy_kwh
            .total_cmp(&b.total_energy_kwh)
            .then(b.f1.total_cmp(&a.f1))
            .then_with(|| a.model.cmp(&b.model))
    });
    // sweep by energy: a row survives if no cheaper-or-equal row has better F1
    let mut front: Vec<EcoRow> = Vec::new();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].total_energy_kwh == sorted[i].total_energy_kwh {
            j += 1;
        }
        // within an equal-energy group the first row has the highest F1; an
        // equal F1 at strictly lower energy already dominates it
        let group_best = sorted[i].f1;
        if group_best > best_f1 {
            front.extend(
                sorted[i..=j]
                    .iter()
                    .filter(|r| r.f1 == group_best)
                    .map(|r| (*r).clone()),
            );
            best_f1 = group_best;
        }
        i = j + 1;
    }
    front
}

pub fn on_front(row: &EcoRow, front: &[EcoRow]) -> bool {
    front.iter().any(|f| f.model == row.model)
}

fn rank_order(a: &EcoRow, b: &EcoRow) -> Ordering {
    b.eei
        .total_cmp(&a.eei)
        .then(a.total_energy_kwh.total_cmp(&b.total_energy_kwh))
        .then_with(|| a.model.cmp(&b.model))
}

/// Model names by descending index, then ascending energy, then name.
pub fn rank_by_eei(t: &EcoTable) -> Vec<String> {
    let mut rows: Vec<&EcoRow> = t.rows.iter().collect();
    rows.sort_by(|a, b| rank_order(a, b));
    rows.into_iter().map(|r| r.model.clone()).collect()
}

/// Writes `eco_table.csv`. Reals use shortest round-trip formatting so other
/// files can copy the same strings.
pub fn write_eco_csv(t: &EcoTable, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(ECO_CSV);
    let front = pareto_front(&t.rows);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(ECO_CSV_HEADER)?;
    for r in &t.rows {
        let nums = [
            r.accuracy,
            r.f1,
            r.roc_auc,
            r.train_energy_kwh,
            r.infer_energy_kwh,
            r.total_energy_kwh,
            r.total_emissions_g,
            r.eei,
        ]
        .map(|v| v.to_string());
        w.write_record(
            std::iter::once(r.model.clone())
                .chain(nums)
                .chain(std::iter::once(on_front(r, &front).to_string())),
        )?;
    }
    w.flush()?;
    Ok(path)
}

/// Reads `eco_table.csv` back; the front flag is recomputed, not stored.
pub fn read_eco_csv(path: &Path, eps: f64, basis: EnergyBasis) -> Result<EcoTable> {
    let mut rdr = csv::Reader::from_path(path)?;
    if rdr.headers()?.iter().ne(ECO_CSV_HEADER) {
        return Err(Error::Schema(format!("unexpected header in {}", path.display())));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| Error::Data(format!("bad number {:?} in {}", &rec[k], path.display())))
        };
        rows.push(EcoRow {
            model: rec[0].to_string(),
            accuracy: num(1)?,
            f1: num(2)?,
            roc_auc: num(3)?,
            train_energy_kwh: num(4)?,
            infer_energy_kwh: num(5)?,
            total_energy_kwh: num(6)?,
            total_emissions_g: num(7)?,
            eei: num(8)?,
        });
    }
    let names: BTreeSet<&str> = rows.iter().map(|r| r.model.as_str()).collect();
    if names.len() != rows.len() {
        return Err(Error::Data(format!("duplicate model names in {}", path.display())));
    }
    Ok(EcoTable { rows, eps, basis })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::BackendKind;

    fn row(model: &str, f1: f64, energy: f64) -> EcoRow {
        EcoRow {
            model: model.into(),
            accuracy: f1,
            f1,
            roc_auc: 0.5,
            train_energy_kwh: energy,
            infer_energy_kwh: 0.0,
            total_energy_kwh: energy,
            total_emissions_g: 0.0,
            eei: eco_index(f1, energy, 1e-12),
        }
    }

    fn perf(model: &str, f1: f64) -> MetricsRow {
        let mut m = MetricsRow::new(model, Default::default(), 0.5);
        m.f1 = f1;
        m
    }

    fn rep(model: &str, phase: Phase, e: f64) -> EnergyReport {
        EnergyReport::new(model, phase, 1.0, e, BackendKind::ConstantPower, 400.0, 2)
    }

    #[test]
    fn index_examples() {
        assert!((eco_index(0.5, 0.5, 1e-300) - 1.0).abs() < 1e-15);
        assert_eq!(eco_index(0.0, 3.0, 1e-12), 0.0);
        // long-form: 0.6151 / 2.83e-11
        let v = eco_index(0.6151, 2.73e-11, 1e-12);
        assert!((v - 2.173_498_233_215_547_7e10).abs() / v < 1e-12);
    }

    #[test]
    fn merge_sums_phases() {
        let perf = vec![perf("a", 0.8), perf("b", 0.6)];
        let energy = vec![
            rep("a", Phase::Train, 2.0),
            rep("a", Phase::Inference, 0.5),
            rep("b", Phase::Train, 1.0),
            rep("b", Phase::Inference, 0.25),
        ];
        let t = merge(&perf, &energy, 1e-12, EnergyBasis::Total).unwrap();
        assert_eq!(t.rows.len(), 2);
        let a = t.get("a").unwrap();
        assert_eq!(a.total_energy_kwh, 2.5);
        assert_eq!(a.total_emissions_g, 1000.0);
        assert_eq!(a.eei, eco_index(a.f1, a.total_energy_kwh, t.eps));
        let train_only = merge(&perf, &energy, 1e-12, EnergyBasis::TrainOnly).unwrap();
        assert_eq!(train_only.get("a").unwrap().eei, eco_index(0.8, 2.0, 1e-12));
    }

    #[test]
    fn merge_missing_phase() {
        let err = merge(
            &[perf("a", 0.8)],
            &[rep("a", Phase::Train, 1.0)],
            1e-12,
            EnergyBasis::Total,
        )
        .unwrap_err();
        match err {
            Error::Join { model, phase } => assert_eq!((model.as_str(), phase.as_str()), ("a", "inference")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn front_examples() {
        let rows = vec![row("x", 0.9, 2.0), row("y", 0.8, 1.0), row("z", 0.7, 3.0)];
        let names: Vec<_> = pareto_front(&rows).into_iter().map(|r| r.model).collect();
        assert_eq!(names, ["y", "x"]);
        assert_eq!(pareto_front(&rows[..1]).len(), 1);
        let twins = vec![row("p", 0.5, 1.0), row("q", 0.5, 1.0)];
        assert_eq!(pareto_front(&twins).len(), 2);
    }

    #[test]
    fn front_equal_f1_keeps_cheapest_only() {
        let rows = vec![row("a", 0.8, 1.0), row("b", 0.8, 2.0), row("c", 0.7, 1.0)];
        let names: Vec<_> = pareto_front(&rows).into_iter().map(|r| r.model).collect();
        assert_eq!(names, ["a"]);
    }

    #[test]
    fn front_is_idempotent() {
        let rows = vec![
            row("a", 0.9, 3.0),
            row("b", 0.95, 4.0),
            row("c", 0.2, 0.1),
            row("d", 0.9, 3.5),
        ];
        let f = pareto_front(&rows);
        assert_eq!(pareto_front(&f), f);
    }

    #[test]
    fn ranking() {
        let mut t = EcoTable {
            rows: vec![],
            eps: 1e-12,
            basis: EnergyBasis::Total,
        };
        t.push(row("three", 0.3, 0.1)).unwrap();
        t.push(row("one", 0.1, 0.1)).unwrap();
        t.push(row("two", 0.2, 0.1)).unwrap();
        assert_eq!(rank_by_eei(&t), ["three", "two", "one"]);

        let mut tie = EcoTable {
            rows: vec![],
            ..t.clone()
        };
        tie.push(row("heavy", 0.4, 2.0)).unwrap();
        tie.push(row("light", 0.2, 1.0)).unwrap();
        tie.rows[0].eei = 1.0;
        tie.rows[1].eei = 1.0;
        assert_eq!(rank_by_eei(&tie), ["light", "heavy"]);
        assert!(t.push(row("one", 0.5, 1.0)).is_err());
    }

    #[test]
    fn ranking_invariant_under_energy_scale() {
        let base: Vec<EcoRow> = [(0.9, 3.0), (0.7, 1.0), (0.8, 2.0), (0.4, 0.3)]
            .iter()
            .enumerate()
            .map(|(i, &(f, e))| row(&format!("m{i}"), f, e))
            .collect();
        let build = |c: f64| {
            let mut t = EcoTable {
                rows: vec![],
                eps: 1e-18,
                basis: EnergyBasis::Total,
            };
            for r in &base {
                let mut r = r.clone();
                r.train_energy_kwh *= c;
                r.total_energy_kwh *= c;
                t.push(r).unwrap();
            }
            rank_by_eei(&t)
        };
        assert_eq!(build(1.0), build(1e-6));
        assert_eq!(build(1.0), build(37.0));
    }

    #[test]
    fn csv_round_trip() {
        let t = merge(
            &[perf("a", 0.81), perf("b", 0.4)],
            &[
                rep("a", Phase::Train, 1.1e-7),
                rep("a", Phase::Inference, 3.3e-9),
                rep("b", Phase::Train, 1e-9),
                rep("b", Phase::Inference, 1e-10),
            ],
            1e-12,
            EnergyBasis::Total,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = write_eco_csv(&t, dir.path()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "model,accuracy,f1,roc_auc,train_energy_kwh,infer_energy_kwh,total_energy_kwh,total_emissions_g,eei,on_pareto_front"
        );
        assert_eq!(read_eco_csv(&path, 1e-12, EnergyBasis::Total).unwrap(), t);
    }
}
