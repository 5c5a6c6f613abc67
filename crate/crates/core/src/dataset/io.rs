use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{ColumnMapping, Dataset, FlowRecord, Provenance, CANONICAL_COLUMNS};
use crate::error::{Error, Result};

/// Loads a flow dataset from a CSV file with a header row.
///
/// `mapping` renames external header names to canonical ones. Columns not in
/// the canonical schema are ignored. Row indices in errors are 0-based data
/// rows (the header is not counted).
pub fn load_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut ds = read_csv(file, mapping)?;
    ds.source = Provenance::File(path.display().to_string());
    Ok(ds)
}

pub fn read_csv<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();

    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, raw) in header.iter().enumerate() {
        let canonical = mapping.get(raw).map(String::as_str).unwrap_or(raw);
        if let Some(name) = CANONICAL_COLUMNS.iter().find(|c| **c == canonical) {
            if position.insert(name, i).is_some() {
                return Err(Error::Schema(format!("column `{name}` appears more than once")));
            }
        }
    }
    let missing: Vec<&str> = CANONICAL_COLUMNS
        .iter()
        .copied()
        .filter(|c| !position.contains_key(c))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "missing required column(s): {}",
            missing.join(", ")
        )));
    }

    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |col: &'static str| -> Cell<'_> {
            Cell {
                row,
                column: col,
                text: rec.get(position[col]).unwrap_or(""),
            }
        };
        records.push(FlowRecord {
            packet_count: cell("packet_count").int()?,
            byte_count: cell("byte_count").int()?,
            flow_duration: cell("flow_duration").real()?,
            protocol_type: cell("protocol_type").text.to_string(),
            src_port: cell("src_port").int()?,
            dst_port: cell("dst_port").int()?,
            avg_pkt_size: cell("avg_pkt_size").real()?,
            payload_entropy: cell("payload_entropy").real()?,
            connection_state: cell("connection_state").text.to_string(),
            cpu_util: cell("cpu_util").real()?,
            mem_util: cell("mem_util").real()?,
            disk_io_util: cell("disk_io_util").real()?,
            net_io_util: cell("net_io_util").real()?,
            vm_count: cell("vm_count").int()?,
            power_consumption_watts: cell("power_consumption_watts").real()?,
            carbon_emission_g_co2eq: cell("carbon_emission_gCO2eq").real()?,
            energy_cost_usd: cell("energy_cost_usd").real()?,
            pue: cell("pue").real()?,
            status: cell("status").int()?,
        });
    }

    Ok(Dataset {
        records,
        source: Provenance::Derived("reader".into()),
        column_mapping: mapping.clone(),
    })
}

struct Cell<'a> {
    row: usize,
    column: &'static str,
    text: &'a str,
}

impl Cell<'_> {
    fn fail(&self) -> Error {
        Error::Parse {
            row: self.row,
            column: self.column.to_string(),
            value: self.text.to_string(),
        }
    }

    fn real(&self) -> Result<f64> {
        self.text.parse::<f64>().map_err(|_| self.fail())
    }

    /// Integers; integral decimal spellings such as `12.0` are accepted.
    fn int(&self) -> Result<i64> {
        if let Ok(v) = self.text.parse::<i64>() {
            return Ok(v);
        }
        match self.text.parse::<f64>() {
            Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
            _ => Err(self.fail()),
        }
    }
}

/// Writes a dataset in the canonical CSV layout. Reals use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(ds, std::io::BufWriter::new(file))
}

pub fn write_csv_to<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CANONICAL_COLUMNS)?;
    for r in &ds.records {
        w.write_record([
            r.packet_count.to_string(),
            r.byte_count.to_string(),
            r.flow_duration.to_string(),
            r.protocol_type.clone(),
            r.src_port.to_string(),
            r.dst_port.to_string(),
            r.avg_pkt_size.to_string(),
            r.payload_entropy.to_string(),
            r.connection_state.clone(),
            r.cpu_util.to_string(),
            r.mem_util.to_string(),
            r.disk_io_util.to_string(),
            r.net_io_util.to_string(),
            r.vm_count.to_string(),
            r.power_consumption_watts.to_string(),
            r.carbon_emission_g_co2eq.to_string(),
            r.energy_cost_usd.to_string(),
            r.pue.to_string(),
            r.status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "packet_count,byte_count,flow_duration,protocol_type,src_port,dst_port,avg_pkt_size,payload_entropy,connection_state,cpu_util,mem_util,disk_io_util,net_io_util,vm_count,power_consumption_watts,carbon_emission_gCO2eq,energy_cost_usd,pue,status";

    fn row(status: &str) -> String {
        format!("10,1000,1.5,TCP,5000,443,100,4.2,EST,10,20,30,40,4,200,80,0.02,1.4,{status}")
    }

    #[test]
    fn three_rows_load_in_order() {
        let text = format!("{HEADER}\n{}\n{}\n{}\n", row("0"), row("1"), row("0"));
        let ds = read_csv(text.as_bytes(), &ColumnMapping::new()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.labels(), vec![0, 1, 0]);
        assert_eq!(ds.records[0].protocol_type, "TCP");
    }

    #[test]
    fn missing_status_is_schema_error() {
        let header = HEADER.trim_end_matches(",status");
        let line = row("0");
        let line = line.rsplit_once(',').unwrap().0;
        let text = format!("{header}\n{line}\n");
        let err = read_csv(text.as_bytes(), &ColumnMapping::new()).unwrap_err();
        match err {
            Error::Schema(msg) => assert!(msg.contains("status")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mapping_supplies_renamed_columns() {
        let header = HEADER.replace("cpu_util", "CPU_Usage").replace("status", "label");
        let text = format!("{header}\n{}\n", row("1"));
        let mut map = ColumnMapping::new();
        map.insert("CPU_Usage".into(), "cpu_util".into());
        map.insert("label".into(), "status".into());
        let ds = read_csv(text.as_bytes(), &map).unwrap();
        assert_eq!(ds.records[0].cpu_util, 10.0);
        assert_eq!(ds.records[0].status, 1);
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let bad = row("0").replacen("1.5", "fast", 1);
        let text = format!("{HEADER}\n{}\n{bad}\n", row("0"));
        match read_csv(text.as_bytes(), &ColumnMapping::new()).unwrap_err() {
            Error::Parse { row, column, value } => {
                assert_eq!(row, 1);
                assert_eq!(column, "flow_duration");
                assert_eq!(value, "fast");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fractional_integer_is_rejected() {
        let bad = row("0").replacen("10,", "10.5,", 1);
        let text = format!("{HEADER}\n{bad}\n");
        assert!(matches!(
            read_csv(text.as_bytes(), &ColumnMapping::new()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn extra_columns_ignored() {
        let text = format!("flow_id,{HEADER}\nabc,{}\n", row("0"));
        let ds = read_csv(text.as_bytes(), &ColumnMapping::new()).unwrap();
        assert_eq!(ds.records[0].packet_count, 10);
    }
}
