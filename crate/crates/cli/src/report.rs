//! Ranked summary of a finished run plus plot-data CSVs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ecobench_core::eco::{rank_by_eei, read_eco_csv, EcoTable, ECO_CSV, LOW_F1};
use serde::Deserialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, StageExt};
use crate::output::RunManifest;

pub const PLOTS_DIR: &str = "plots";
pub const F1_VS_ENERGY_CSV: &str = "f1_vs_energy.csv";
pub const ACCURACY_VS_EMISSIONS_CSV: &str = "accuracy_vs_emissions.csv";

#[derive(Debug, Clone)]
pub struct Report {
    pub text: String,
    pub warnings: Vec<String>,
    pub plots: Vec<PathBuf>,
    pub table: EcoTable,
}

/// Reads the manifest and eco table of `dir`, prints nothing, and writes
/// `plots/*.csv` whose cells are copied verbatim from `eco_table.csv`.
pub fn run_report(dir: &Path) -> CliResult<Report> {
    let manifest = RunManifest::read(dir)?;
    manifest.verify(dir)?;
    if manifest.file(ECO_CSV).is_none() {
        return Err(CliError::data(
            "report",
            format!("{} lists no {ECO_CSV}", dir.display()),
        ));
    }
    let cfg: RunConfig = RunConfig::deserialize(&manifest.config)
        .map_err(|e| CliError::data("report", format!("manifest config: {e}")))?;
    let eco_path = dir.join(ECO_CSV);
    let table = read_eco_csv(&eco_path, cfg.eps, cfg.energy_basis).stage("report")?;

    let (header, cells) = read_cells(&eco_path)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::data("report", format!("{ECO_CSV} has no `{name}` column")))
    };
    let plots_dir = dir.join(PLOTS_DIR);
    fs::create_dir_all(&plots_dir).stage("report")?;
    let mut plots = Vec::new();
    for (file, columns) in [
        (
            F1_VS_ENERGY_CSV,
            ["model", "total_energy_kwh", "f1", "on_pareto_front"].as_slice(),
        ),
        (
            ACCURACY_VS_EMISSIONS_CSV,
            ["model", "total_emissions_g", "accuracy"].as_slice(),
        ),
    ] {
        let idx = columns.iter().map(|c| col(c)).collect::<CliResult<Vec<_>>>()?;
        let path = plots_dir.join(file);
        let tmp = plots_dir.join(format!(".{file}.tmp"));
        let mut w = csv::Writer::from_path(&tmp).map_err(|e| CliError::runtime("report", e.to_string()))?;
        w.write_record(columns)
            .map_err(|e| CliError::runtime("report", e.to_string()))?;
        for row in &cells {
            w.write_record(idx.iter().map(|&i| row[i].as_str()))
                .map_err(|e| CliError::runtime("report", e.to_string()))?;
        }
        w.flush().stage("report")?;
        drop(w);
        fs::rename(&tmp, &path).stage("report")?;
        plots.push(path);
    }

    let mut warnings = Vec::new();
    if table.rows.is_empty() {
        warnings.push(format!(
            "{} has no rows; plot files contain headers only",
            eco_path.display()
        ));
    }
    Ok(Report {
        text: render(&table),
        warnings,
        plots,
        table,
    })
}

fn read_cells(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let err = |e: csv::Error| CliError::data("report", format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(err)?;
    let header = rdr.headers().map_err(err)?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(err)?;
    Ok((header, rows))
}

/// The table ranked by eco-efficiency index; low-F1 rows are marked.
pub fn render(table: &EcoTable) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>4}  {:<28} {:>8} {:>8} {:>14} {:>14} {:>14}",
        "rank", "model", "f1", "accuracy", "energy_kwh", "emissions_g", "eei"
    );
    let mut flagged = false;
    for (i, name) in rank_by_eei(table).iter().enumerate() {
        let r = table.get(name).expect("ranked rows come from the table");
        let mark = if r.low_f1() {
            flagged = true;
            "  *"
        } else {
            ""
        };
        let _ = writeln!(
            s,
            "{:>4}  {:<28} {:>8.4} {:>8.4} {:>14.6e} {:>14.6e} {:>14.6e}{mark}",
            i + 1,
            r.model,
            r.f1,
            r.accuracy,
            r.total_energy_kwh,
            r.total_emissions_g,
            r.eei
        );
    }
    if flagged {
        let _ = writeln!(
            s,
            "* F1 below {LOW_F1}: a high index here reflects low energy, not good detection"
        );
    }
    s
}
