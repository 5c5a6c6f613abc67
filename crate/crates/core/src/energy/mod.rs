//! Energy and carbon accounting for training and inference phases.
//!
//! Power is sampled by a pluggable backend while a workload runs, integrated
//! with the trapezoidal rule and converted to emissions with a configured
//! grid carbon intensity.

mod rapl;
mod tracker;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use rapl::{discover_domains, rapl_delta, read_rapl_counter, RaplDomain, DEFAULT_POWERCAP_ROOT};
#[cfg(test)]
pub(crate) use tracker::TEST_LOCK;
pub use tracker::{read_trace, track};

pub const JOULES_PER_KWH: f64 = 3.6e6;

/// Placeholder grid intensity (g CO2eq per kWh). Not an authoritative
/// figure for any region; set the real value in the run configuration.
pub const DEFAULT_CARBON_INTENSITY: f64 = 400.0;

pub const CARBON_CSV: &str = "carbon_energy_metrics.csv";
pub const CARBON_CSV_HEADER: [&str; 8] = [
    "model",
    "phase",
    "duration_s",
    "energy_kwh",
    "emissions_g",
    "backend",
    "carbon_intensity_g_per_kwh",
    "sample_count",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    /// Seconds since the tracker started.
    pub t: f64,
    pub watts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Inference,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Inference => "inference",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Phase::Train),
            "inference" => Ok(Phase::Inference),
            other => Err(Error::Parameter(format!("unknown phase `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Rapl,
    ConstantPower,
    TraceReplay,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Rapl => "rapl",
            BackendKind::ConstantPower => "constant_power",
            BackendKind::TraceReplay => "trace_replay",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rapl" => Ok(BackendKind::Rapl),
            "constant_power" => Ok(BackendKind::ConstantPower),
            "trace_replay" => Ok(BackendKind::TraceReplay),
            other => Err(Error::Parameter(format!(
                "unknown energy backend `{other}` (expected rapl, constant_power or trace_replay)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub backend: BackendKind,
    pub sampling_interval_ms: u64,
    pub carbon_intensity_g_per_kwh: f64,
    /// Draw assumed by the constant_power backend.
    pub constant_watts: f64,
    /// `t_s,watts` CSV replayed by the trace_replay backend.
    pub trace_path: Option<PathBuf>,
    /// Directory holding powercap `intel-rapl:*` domains.
    pub rapl_root: PathBuf,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::ConstantPower,
            sampling_interval_ms: 100,
            carbon_intensity_g_per_kwh: DEFAULT_CARBON_INTENSITY,
            constant_watts: 50.0,
            trace_path: None,
            rapl_root: PathBuf::from(DEFAULT_POWERCAP_ROOT),
        }
    }
}

impl TrackerConfig {
    pub fn constant(watts: f64) -> Self {
        Self {
            constant_watts: watts,
            ..Self::default()
        }
    }

    pub fn trace(path: impl Into<PathBuf>) -> Self {
        Self {
            backend: BackendKind::TraceReplay,
            trace_path: Some(path.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sampling_interval_ms < 10 {
            return Err(Error::Parameter(format!(
                "sampling_interval_ms must be at least 10, got {}",
                self.sampling_interval_ms
            )));
        }
        if !(self.carbon_intensity_g_per_kwh > 0.0 && self.carbon_intensity_g_per_kwh.is_finite()) {
            return Err(Error::Parameter(format!(
                "carbon_intensity_g_per_kwh must be positive, got {}",
                self.carbon_intensity_g_per_kwh
            )));
        }
        match self.backend {
            BackendKind::ConstantPower if !(self.constant_watts >= 0.0 && self.constant_watts.is_finite()) => {
                Err(Error::Parameter(format!(
                    "constant_watts must be non-negative, got {}",
                    self.constant_watts
                )))
            }
            BackendKind::TraceReplay if self.trace_path.is_none() => {
                Err(Error::Parameter("trace_replay backend needs trace_path".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    #[serde(rename = "model")]
    pub label: String,
    pub phase: Phase,
    pub duration_s: f64,
    pub energy_kwh: f64,
    pub emissions_g: f64,
    pub backend: String,
    pub carbon_intensity_g_per_kwh: f64,
    pub sample_count: usize,
}

impl EnergyReport {
    pub fn new(
        label: impl Into<String>,
        phase: Phase,
        duration_s: f64,
        energy_kwh: f64,
        backend: BackendKind,
        carbon_intensity_g_per_kwh: f64,
        sample_count: usize,
    ) -> Self {
        Self {
            label: label.into(),
            phase,
            duration_s,
            energy_kwh,
            emissions_g: emissions_from_energy(energy_kwh, carbon_intensity_g_per_kwh),
            backend: backend.name().to_string(),
            carbon_intensity_g_per_kwh,
            sample_count,
        }
    }
}

/// Trapezoidal integral of power over time, in kWh.
pub fn integrate_energy(samples: &[PowerSample]) -> Result<f64> {
    let mut joules = 0.0;
    for w in samples.windows(2) {
        if w[1].t.partial_cmp(&w[0].t) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Trace(format!(
                "timestamps must increase strictly ({} then {})",
                w[0].t, w[1].t
            )));
        }
        joules += 0.5 * (w[0].watts + w[1].watts) * (w[1].t - w[0].t);
    }
    Ok(joules / JOULES_PER_KWH)
}

pub fn emissions_from_energy(kwh: f64, intensity_g_per_kwh: f64) -> f64 {
    kwh * intensity_g_per_kwh
}

pub fn kg_to_g(kg: f64) -> f64 {
    kg * 1000.0
}

/// Writes `carbon_energy_metrics.csv` into `dir`, one row per report.
pub fn write_carbon_csv(reports: &[EnergyReport], dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(CARBON_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(CARBON_CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.label.clone(),
            r.phase.to_string(),
            format!("{:.15e}", r.duration_s),
            format!("{:.15e}", r.energy_kwh),
            format!("{:.15e}", r.emissions_g),
            r.backend.clone(),
            r.carbon_intensity_g_per_kwh.to_string(),
            r.sample_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

pub fn read_carbon_csv(path: &Path) -> Result<Vec<EnergyReport>> {
    let mut rdr = csv::Reader::from_path(path)?;
    if rdr.headers()?.iter().ne(CARBON_CSV_HEADER) {
        return Err(Error::Schema(format!("unexpected header in {}", path.display())));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Data(format!("bad number {s:?} in {}", path.display())))
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(EnergyReport {
            label: rec[0].to_string(),
            phase: rec[1].parse()?,
            duration_s: num(&rec[2])?,
            energy_kwh: num(&rec[3])?,
            emissions_g: num(&rec[4])?,
            backend: rec[5].to_string(),
            carbon_intensity_g_per_kwh: num(&rec[6])?,
            sample_count: rec[7]
                .parse()
                .map_err(|_| Error::Data(format!("bad sample count {:?}", &rec[7])))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(t: f64, watts: f64) -> PowerSample {
        PowerSample { t, watts }
    }

    #[test]
    fn integration_examples() {
        let hour: Vec<_> = (0..=3600).map(|t| s(t as f64, 10.0)).collect();
        assert!((integrate_energy(&hour).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(integrate_energy(&[s(0.0, 0.0), s(10.0, 20.0)]).unwrap(), 100.0 / 3.6e6);
        assert_eq!(integrate_energy(&[]).unwrap(), 0.0);
        assert_eq!(integrate_energy(&[s(1.0, 99.0)]).unwrap(), 0.0);
        assert!(matches!(
            integrate_energy(&[s(1.0, 1.0), s(1.0, 2.0)]),
            Err(Error::Trace(_))
        ));
    }

    #[test]
    fn integration_is_additive() {
        let a = [s(0.0, 3.0), s(1.5, 7.0), s(2.0, 1.0)];
        let b = [s(2.0, 1.0), s(4.0, 9.0)];
        let joined = [a.as_slice(), &b[1..]].concat();
        let lhs = integrate_energy(&joined).unwrap();
        let rhs = integrate_energy(&a).unwrap() + integrate_energy(&b).unwrap();
        assert!((lhs - rhs).abs() <= 1e-15 * lhs);
    }

    #[test]
    fn emissions_examples() {
        assert_eq!(emissions_from_energy(0.0, 400.0), 0.0);
        assert!((emissions_from_energy(0.001, 400.0) - 0.4).abs() < 1e-15);
        assert_eq!(kg_to_g(5.53e-5), 0.0553);
        assert_eq!(
            emissions_from_energy(0.3, 800.0),
            2.0 * emissions_from_energy(0.3, 400.0)
        );
    }

    #[test]
    fn config_validation() {
        assert!(TrackerConfig::default().validate().is_ok());
        let bad = TrackerConfig {
            sampling_interval_ms: 5,
            ..TrackerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrackerConfig {
            carbon_intensity_g_per_kwh: 0.0,
            ..TrackerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrackerConfig {
            backend: BackendKind::TraceReplay,
            ..TrackerConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn carbon_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut reports = Vec::new();
        for (i, model) in ["a", "b", "c", "d", "e"].iter().enumerate() {
            for phase in [Phase::Train, Phase::Inference] {
                let e = 1.234567891234e-7 * (i + 1) as f64 / 3.0;
                reports.push(EnergyReport::new(
                    *model,
                    phase,
                    0.1 * i as f64,
                    e,
                    BackendKind::ConstantPower,
                    400.0,
                    7,
                ));
            }
        }
        let path = write_carbon_csv(&reports, dir.path()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert_eq!(
            text.lines().next().unwrap(),
            "model,phase,duration_s,energy_kwh,emissions_g,backend,carbon_intensity_g_per_kwh,sample_count"
        );
        let back = read_carbon_csv(&path).unwrap();
        for (a, b) in reports.iter().zip(&back) {
            assert_eq!(
                (&a.label, a.phase, &a.backend, a.sample_count),
                (&b.label, b.phase, &b.backend, b.sample_count)
            );
            for (x, y) in [
                (a.energy_kwh, b.energy_kwh),
                (a.emissions_g, b.emissions_g),
                (a.duration_s, b.duration_s),
            ] {
                assert!((x - y).abs() <= 1e-12 * x.abs());
            }
        }
    }

    #[test]
    fn empty_carbon_csv_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_carbon_csv(&[], dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(path).unwrap().lines().count(), 1);
    }
}
