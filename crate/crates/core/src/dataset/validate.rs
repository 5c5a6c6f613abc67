use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Dataset, FlowRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationPolicy {
    /// Fail on the first dataset containing any violation.
    Reject,
    /// Pull out-of-range values to the nearest bound; rows with non-finite
    /// values cannot be repaired and are dropped.
    Clamp,
    /// Remove every row with at least one violation.
    DropRow,
}

impl std::str::FromStr for ValidationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reject" => Ok(Self::Reject),
            "clamp" => Ok(Self::Clamp),
            "drop-row" | "drop_row" => Ok(Self::DropRow),
            other => Err(Error::Parameter(format!("unknown validation policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    OutOfRange,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub row: usize,
    pub column: String,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub policy: ValidationPolicy,
    pub input_rows: usize,
    pub retained_rows: usize,
    /// Input row indices removed from the output.
    pub dropped_rows: Vec<usize>,
    pub violations: Vec<Violation>,
    /// Counts keyed by `column:rule`.
    pub rule_counts: BTreeMap<String, usize>,
}

impl ValidationReport {
    pub fn total_violations(&self) -> usize {
        self.violations.len()
    }

    /// Input rows with at least one violation.
    pub fn violating_rows(&self) -> Vec<usize> {
        self.violations
            .iter()
            .map(|v| v.row)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} of {} rows retained, {} violation(s)",
            self.retained_rows,
            self.input_rows,
            self.violations.len()
        )?;
        for (rule, count) in &self.rule_counts {
            write!(f, "; {rule}={count}")?;
        }
        Ok(())
    }
}

struct Bound {
    column: &'static str,
    lo: f64,
    hi: f64,
    get: fn(&FlowRecord) -> f64,
    set: fn(&mut FlowRecord, f64),
}

const INF: f64 = f64::INFINITY;

macro_rules! bound {
    ($col:literal, $field:ident, $lo:expr, $hi:expr, int) => {
        Bound {
            column: $col,
            lo: $lo,
            hi: $hi,
            get: |r| r.$field as f64,
            set: |r, v| r.$field = v as i64,
        }
    };
    ($col:literal, $field:ident, $lo:expr, $hi:expr) => {
        Bound {
            column: $col,
            lo: $lo,
            hi: $hi,
            get: |r| r.$field,
            set: |r, v| r.$field = v,
        }
    };
}

const BOUNDS: [Bound; 17] = [
    bound!("packet_count", packet_count, 0.0, INF, int),
    bound!("byte_count", byte_count, 0.0, INF, int),
    bound!("flow_duration", flow_duration, 0.0, INF),
    bound!("src_port", src_port, 0.0, 65535.0, int),
    bound!("dst_port", dst_port, 0.0, 65535.0, int),
    bound!("avg_pkt_size", avg_pkt_size, 0.0, INF),
    bound!("payload_entropy", payload_entropy, 0.0, 8.0),
    bound!("cpu_util", cpu_util, 0.0, 100.0),
    bound!("mem_util", mem_util, 0.0, 100.0),
    bound!("disk_io_util", disk_io_util, 0.0, 100.0),
    bound!("net_io_util", net_io_util, 0.0, 100.0),
    bound!("vm_count", vm_count, 1.0, INF, int),
    bound!("power_consumption_watts", power_consumption_watts, 0.0, INF),
    bound!("carbon_emission_gCO2eq", carbon_emission_g_co2eq, 0.0, INF),
    bound!("energy_cost_usd", energy_cost_usd, 0.0, INF),
    bound!("pue", pue, 1.0, INF),
    bound!("status", status, 0.0, 1.0, int),
];

/// Checks every record against the schema invariants and applies `policy`.
///
/// Violations are listed in row order, then column order. With
/// [`ValidationPolicy::Reject`] any violation yields [`Error::Validation`].
pub fn validate(ds: &Dataset, policy: ValidationPolicy) -> Result<(Dataset, ValidationReport)> {
    let mut violations = Vec::new();
    let mut kept = Vec::with_capacity(ds.len());
    let mut dropped_rows = Vec::new();

    for (row, rec) in ds.records.iter().enumerate() {
        let mut repaired = rec.clone();
        let mut drop = false;
        let before = violations.len();
        for b in &BOUNDS {
            let v = (b.get)(rec);
            let rule = if !v.is_finite() {
                Rule::NonFinite
            } else if v < b.lo || v > b.hi {
                Rule::OutOfRange
            } else {
                continue;
            };
            violations.push(Violation {
                row,
                column: b.column.to_string(),
                rule,
            });
            match (policy, rule) {
                (ValidationPolicy::Clamp, Rule::OutOfRange) => (b.set)(&mut repaired, v.clamp(b.lo, b.hi)),
                (ValidationPolicy::Clamp, Rule::NonFinite) | (ValidationPolicy::DropRow, _) => drop = true,
                (ValidationPolicy::Reject, _) => {}
            }
        }
        if drop {
            dropped_rows.push(row);
        } else if violations.len() > before {
            kept.push(repaired);
        } else {
            kept.push(rec.clone());
        }
    }

    let mut rule_counts = BTreeMap::new();
    for v in &violations {
        let key = format!(
            "{}:{}",
            v.column,
            match v.rule {
                Rule::OutOfRange => "out_of_range",
                Rule::NonFinite => "non_finite",
            }
        );
        *rule_counts.entry(key).or_insert(0) += 1;
    }

    let report = ValidationReport {
        policy,
        input_rows: ds.len(),
        retained_rows: kept.len(),
        dropped_rows,
        violations,
        rule_counts,
    };

    if policy == ValidationPolicy::Reject && report.total_violations() > 0 {
        return Err(Error::Validation(Box::new(report)));
    }

    Ok((
        Dataset {
            records: kept,
            source: ds.source.clone(),
            column_mapping: ds.column_mapping.clone(),
        },
        report,
    ))
}
