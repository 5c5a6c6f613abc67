//! Flow-record schema, CSV ingestion, validation and synthetic generation.

mod io;
mod synthetic;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use io::{load_csv, read_csv, write_csv, write_csv_to};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use validate::{validate, Rule, ValidationPolicy, ValidationReport, Violation};

/// One aggregated network flow with co-recorded resource and sustainability
/// measurements. Integers are held signed so out-of-range input survives
/// loading and can be reported by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub packet_count: i64,
    pub byte_count: i64,
    /// Seconds.
    pub flow_duration: f64,
    pub protocol_type: String,
    pub src_port: i64,
    pub dst_port: i64,
    /// Bytes.
    pub avg_pkt_size: f64,
    /// Bits per byte, in `[0, 8]`.
    pub payload_entropy: f64,
    pub connection_state: String,
    pub cpu_util: f64,
    pub mem_util: f64,
    pub disk_io_util: f64,
    pub net_io_util: f64,
    pub vm_count: i64,
    pub power_consumption_watts: f64,
    #[serde(rename = "carbon_emission_gCO2eq")]
    pub carbon_emission_g_co2eq: f64,
    pub energy_cost_usd: f64,
    pub pue: f64,
    /// 0 = normal, 1 = anomaly.
    pub status: i64,
}

/// Canonical column names, in file order.
pub const CANONICAL_COLUMNS: [&str; 19] = [
    "packet_count",
    "byte_count",
    "flow_duration",
    "protocol_type",
    "src_port",
    "dst_port",
    "avg_pkt_size",
    "payload_entropy",
    "connection_state",
    "cpu_util",
    "mem_util",
    "disk_io_util",
    "net_io_util",
    "vm_count",
    "power_consumption_watts",
    "carbon_emission_gCO2eq",
    "energy_cost_usd",
    "pue",
    "status",
];

pub const CATEGORICAL_COLUMNS: [&str; 2] = ["protocol_type", "connection_state"];

/// Columns that describe the host's energy footprint rather than the traffic.
pub const SUSTAINABILITY_COLUMNS: [&str; 4] = [
    "power_consumption_watts",
    "carbon_emission_gCO2eq",
    "energy_cost_usd",
    "pue",
];

type Getter = fn(&FlowRecord) -> f64;

/// Every numeric column with an accessor, in canonical order.
pub const NUMERIC_COLUMNS: [(&str, Getter); 17] = [
    ("packet_count", |r| r.packet_count as f64),
    ("byte_count", |r| r.byte_count as f64),
    ("flow_duration", |r| r.flow_duration),
    ("src_port", |r| r.src_port as f64),
    ("dst_port", |r| r.dst_port as f64),
    ("avg_pkt_size", |r| r.avg_pkt_size),
    ("payload_entropy", |r| r.payload_entropy),
    ("cpu_util", |r| r.cpu_util),
    ("mem_util", |r| r.mem_util),
    ("disk_io_util", |r| r.disk_io_util),
    ("net_io_util", |r| r.net_io_util),
    ("vm_count", |r| r.vm_count as f64),
    ("power_consumption_watts", |r| r.power_consumption_watts),
    ("carbon_emission_gCO2eq", |r| r.carbon_emission_g_co2eq),
    ("energy_cost_usd", |r| r.energy_cost_usd),
    ("pue", |r| r.pue),
    ("status", |r| r.status as f64),
];

impl FlowRecord {
    pub fn categorical(&self, column: &str) -> Option<&str> {
        match column {
            "protocol_type" => Some(&self.protocol_type),
            "connection_state" => Some(&self.connection_state),
            _ => None,
        }
    }

    pub fn is_anomaly(&self) -> bool {
        self.status == 1
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    File(String),
    Synthetic(SyntheticSpec),
    Derived(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::File(p) => write!(f, "file:{p}"),
            Provenance::Synthetic(s) => write!(
                f,
                "synthetic:n={},anomaly_fraction={},signal_strength={},interaction={},seed={}",
                s.n, s.anomaly_fraction, s.signal_strength, s.interaction, s.seed
            ),
            Provenance::Derived(d) => write!(f, "derived:{d}"),
        }
    }
}

/// Maps external (file) column names to canonical names.
pub type ColumnMapping = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<FlowRecord>,
    pub source: Provenance,
    pub column_mapping: ColumnMapping,
}

impl Dataset {
    pub fn new(records: Vec<FlowRecord>, source: Provenance) -> Self {
        Self {
            records,
            source,
            column_mapping: ColumnMapping::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn anomaly_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_anomaly()).count()
    }

    /// Values of a numeric column by canonical name.
    pub fn numeric_column(&self, name: &str) -> Option<Vec<f64>> {
        let (_, get) = NUMERIC_COLUMNS.iter().find(|(n, _)| *n == name)?;
        Some(self.records.iter().map(get).collect())
    }

    /// All numeric columns as `(name, values)` pairs in canonical order.
    pub fn numeric_columns(&self) -> Vec<(&'static str, Vec<f64>)> {
        NUMERIC_COLUMNS
            .iter()
            .map(|(name, get)| (*name, self.records.iter().map(get).collect()))
            .collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| u8::from(r.is_anomaly())).collect()
    }
}
