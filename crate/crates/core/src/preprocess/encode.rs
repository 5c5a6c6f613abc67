use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::dataset::{Dataset, FlowRecord, CATEGORICAL_COLUMNS, NUMERIC_COLUMNS, SUSTAINABILITY_COLUMNS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const ENGINEERED_COLUMNS: [&str; 4] = [
    "bytes_per_packet",
    "payload_entropy_x_size",
    "resource_util_sum",
    "power_per_vm",
];

/// The four derived features, computed from one record's base fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedFeatures {
    pub bytes_per_packet: f64,
    pub payload_entropy_x_size: f64,
    pub resource_util_sum: f64,
    pub power_per_vm: f64,
}

impl DerivedFeatures {
    pub fn from_record(r: &FlowRecord) -> Self {
        let bytes_per_packet = if r.packet_count == 0 {
            0.0
        } else {
            r.byte_count as f64 / r.packet_count as f64
        };
        // vm_count >= 1 after validation; guard anyway so the value stays finite.
        let power_per_vm = if r.vm_count == 0 {
            0.0
        } else {
            r.power_consumption_watts / r.vm_count as f64
        };
        Self {
            bytes_per_packet,
            payload_entropy_x_size: r.payload_entropy * r.avg_pkt_size,
            resource_util_sum: r.cpu_util + r.mem_util + r.disk_io_util + r.net_io_util,
            power_per_vm,
        }
    }

    fn values(&self) -> [f64; 4] {
        [
            self.bytes_per_packet,
            self.payload_entropy_x_size,
            self.resource_util_sum,
            self.power_per_vm,
        ]
    }
}

/// A dataset with the derived feature columns appended.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineeredDataset {
    pub base: Dataset,
    pub derived: Vec<DerivedFeatures>,
}

pub fn engineer_features(ds: &Dataset) -> EngineeredDataset {
    EngineeredDataset {
        derived: ds.records.iter().map(DerivedFeatures::from_record).collect(),
        base: ds.clone(),
    }
}

/// Per-column category → code maps; codes follow lexicographic token order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEncoding {
    pub columns: BTreeMap<String, BTreeMap<String, usize>>,
}

impl LabelEncoding {
    pub fn fit(ds: &Dataset) -> Self {
        let columns = CATEGORICAL_COLUMNS
            .iter()
            .map(|&col| {
                let tokens: BTreeSet<&str> = ds.records.iter().filter_map(|r| r.categorical(col)).collect();
                let codes = tokens
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| (t.to_string(), i))
                    .collect();
                (col.to_string(), codes)
            })
            .collect();
        Self { columns }
    }

    pub fn code(&self, column: &str, token: &str) -> Result<usize> {
        self.columns
            .get(column)
            .and_then(|m| m.get(token))
            .copied()
            .ok_or_else(|| Error::Encoding {
                column: column.to_string(),
                token: token.to_string(),
            })
    }

    /// Encodes `ds` with this (already fitted) encoding.
    pub fn transform(&self, ds: &EngineeredDataset, exclude_sustainability: bool) -> Result<FeatureMatrix> {
        let columns = feature_columns(exclude_sustainability);
        let mut data = Vec::with_capacity(ds.base.len() * columns.len());
        for (rec, derived) in ds.base.records.iter().zip(&ds.derived) {
            for (name, get) in NUMERIC_COLUMNS.iter() {
                if *name == "status" || (exclude_sustainability && SUSTAINABILITY_COLUMNS.contains(name)) {
                    continue;
                }
                data.push(get(rec));
                // Categorical codes sit where the token columns were in the schema.
                if *name == "flow_duration" {
                    data.push(self.code("protocol_type", &rec.protocol_type)? as f64);
                }
                if *name == "payload_entropy" {
                    data.push(self.code("connection_state", &rec.connection_state)? as f64);
                }
            }
            let extra = derived.values();
            let keep = if exclude_sustainability { 3 } else { 4 };
            data.extend_from_slice(&extra[..keep]);
        }
        let labels = ds
            .base
            .records
            .iter()
            .map(|r| match r.status {
                0 => Ok(0),
                1 => Ok(1),
                other => Err(Error::Data(format!("status {other} is not 0/1"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        let values = Matrix::from_vec(ds.base.len(), columns.len(), data)?;
        FeatureMatrix::new(values, labels, columns)
    }
}

/// Feature column names produced by [`encode`], in order.
pub fn feature_columns(exclude_sustainability: bool) -> Vec<String> {
    let mut cols = Vec::new();
    for (name, _) in NUMERIC_COLUMNS.iter() {
        if *name == "status" || (exclude_sustainability && SUSTAINABILITY_COLUMNS.contains(name)) {
            continue;
        }
        cols.push(name.to_string());
        if *name == "flow_duration" {
            cols.push("protocol_type_code".to_string());
        }
        if *name == "payload_entropy" {
            cols.push("connection_state_code".to_string());
        }
    }
    let keep = if exclude_sustainability { 3 } else { 4 };
    cols.extend(ENGINEERED_COLUMNS[..keep].iter().map(|s| s.to_string()));
    cols
}

/// Fits a label encoding on `ds` and encodes it. With `exclude_sustainability`
/// the power, carbon, cost and PUE columns are left out, together with
/// `power_per_vm`, which is derived from power.
pub fn encode(ds: &EngineeredDataset, exclude_sustainability: bool) -> Result<(FeatureMatrix, LabelEncoding)> {
    let enc = LabelEncoding::fit(&ds.base);
    let m = enc.transform(ds, exclude_sustainability)?;
    Ok((m, enc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, Provenance};

    fn record() -> FlowRecord {
        let mut ds = generate_synthetic(10, 0.5, 0.0, 3).unwrap();
        ds.records.swap_remove(0)
    }

    #[test]
    fn bytes_per_packet_formula() {
        let mut r = record();
        r.byte_count = 1000;
        r.packet_count = 10;
        assert_eq!(DerivedFeatures::from_record(&r).bytes_per_packet, 100.0);
        r.packet_count = 0;
        assert_eq!(DerivedFeatures::from_record(&r).bytes_per_packet, 0.0);
    }

    #[test]
    fn util_sum_and_power_per_vm() {
        let mut r = record();
        (r.cpu_util, r.mem_util, r.disk_io_util, r.net_io_util) = (10.0, 20.0, 30.0, 40.0);
        r.power_consumption_watts = 200.0;
        r.vm_count = 4;
        let d = DerivedFeatures::from_record(&r);
        assert_eq!(d.resource_util_sum, 100.0);
        assert_eq!(d.power_per_vm, 50.0);
        r.payload_entropy = 2.0;
        r.avg_pkt_size = 300.0;
        assert_eq!(DerivedFeatures::from_record(&r).payload_entropy_x_size, 600.0);
    }

    #[test]
    fn lexicographic_codes() {
        let mut ds = generate_synthetic(30, 0.5, 0.0, 1).unwrap();
        for (i, r) in ds.records.iter_mut().enumerate() {
            r.protocol_type = ["UDP", "TCP", "ICMP"][i % 3].to_string();
        }
        let enc = LabelEncoding::fit(&ds);
        assert_eq!(enc.code("protocol_type", "ICMP").unwrap(), 0);
        assert_eq!(enc.code("protocol_type", "TCP").unwrap(), 1);
        assert_eq!(enc.code("protocol_type", "UDP").unwrap(), 2);
    }

    #[test]
    fn single_category_is_all_zero() {
        let mut ds = generate_synthetic(20, 0.5, 0.0, 1).unwrap();
        for r in &mut ds.records {
            r.connection_state = "EST".into();
        }
        let (m, _) = encode(&engineer_features(&ds), false).unwrap();
        let c = m.columns.iter().position(|c| c == "connection_state_code").unwrap();
        assert!(m.values.column(c).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_and_labels() {
        let ds = generate_synthetic(2300, 0.25, 1.0, 4).unwrap();
        let (m, _) = encode(&engineer_features(&ds), false).unwrap();
        assert_eq!(m.rows(), 2300);
        assert_eq!(m.cols(), 22);
        assert_eq!(m.columns, feature_columns(false));
        assert!(m.labels.iter().all(|&y| y <= 1));
        assert_eq!(m.class_counts()[1], 575);
        assert!(!m.columns.iter().any(|c| c == "protocol_type" || c == "status"));
    }

    #[test]
    fn exclude_sustainability_drops_columns() {
        let ds = generate_synthetic(50, 0.5, 1.0, 4).unwrap();
        let (m, _) = encode(&engineer_features(&ds), true).unwrap();
        assert_eq!(m.cols(), 17);
        for col in SUSTAINABILITY_COLUMNS.iter().chain(["power_per_vm"].iter()) {
            assert!(!m.columns.iter().any(|c| c == col), "{col} still present");
        }
    }

    #[test]
    fn unseen_category_names_column_and_token() {
        let train = generate_synthetic(20, 0.5, 0.0, 1).unwrap();
        let enc = LabelEncoding::fit(&train);
        let mut test = generate_synthetic(20, 0.5, 0.0, 2).unwrap();
        test.records[3].protocol_type = "SCTP".into();
        test.source = Provenance::Derived("test".into());
        match enc.transform(&engineer_features(&test), false) {
            Err(Error::Encoding { column, token }) => {
                assert_eq!(column, "protocol_type");
                assert_eq!(token, "SCTP");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
