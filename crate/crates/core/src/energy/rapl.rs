use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const DEFAULT_POWERCAP_ROOT: &str = "/sys/class/powercap";

/// One top-level powercap energy domain (a CPU package).
#[derive(Debug, Clone, PartialEq)]
pub struct RaplDomain {
    pub energy_path: PathBuf,
    pub max_range_uj: u64,
}

fn backend_err(message: impl Into<String>, path: &Path) -> Error {
    Error::Backend {
        message: message.into(),
        path: path.to_path_buf(),
    }
}

fn read_u64(path: &Path) -> Result<u64> {
    let text = std::fs::read_to_string(path).map_err(|e| backend_err(format!("cannot read counter: {e}"), path))?;
    text.trim()
        .parse()
        .map_err(|_| backend_err(format!("counter is not an integer: {:?}", text.trim()), path))
}

/// Raw cumulative microjoule reading.
pub fn read_rapl_counter(domain: &RaplDomain) -> Result<u64> {
    read_u64(&domain.energy_path)
}

/// Counter difference allowing for a single wraparound.
pub fn rapl_delta(prev: u64, cur: u64, max_range_uj: u64) -> u64 {
    if cur >= prev {
        cur - prev
    } else {
        cur + max_range_uj - prev
    }
}

/// Package-level domains (`intel-rapl:N`) under `root`. Subdomains such as
/// `intel-rapl:0:0` are skipped because packages already include them.
pub fn discover_domains(root: &Path) -> Result<Vec<RaplDomain>> {
    let entries = std::fs::read_dir(root).map_err(|e| backend_err(format!("powercap unavailable: {e}"), root))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.strip_prefix("intel-rapl:").is_some_and(|rest| !rest.contains(':')))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(backend_err("no intel-rapl package domains found", root));
    }
    names
        .into_iter()
        .map(|n| {
            let dir = root.join(n);
            let energy_path = dir.join("energy_uj");
            if !energy_path.exists() {
                return Err(backend_err("missing energy counter", &energy_path));
            }
            Ok(RaplDomain {
                max_range_uj: read_u64(&dir.join("max_energy_range_uj"))?,
                energy_path,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversion() {
        assert_eq!(rapl_delta(0, 3_600_000_000, u64::MAX) as f64 / 1e6 / 3.6e6, 0.001);
    }

    #[test]
    fn wraparound() {
        assert_eq!(rapl_delta(9_900_000_000, 100_000_000, 10_000_000_000), 200_000_000);
        assert_eq!(rapl_delta(5, 5, 10), 0);
    }

    #[test]
    fn discovers_packages_only() {
        let dir = tempfile::tempdir().unwrap();
        for d in ["intel-rapl:0", "intel-rapl:0:0", "intel-rapl:1"] {
            let p = dir.path().join(d);
            std::fs::create_dir(&p).unwrap();
            std::fs::write(p.join("energy_uj"), "42\n").unwrap();
            std::fs::write(p.join("max_energy_range_uj"), "1000\n").unwrap();
        }
        let domains = discover_domains(dir.path()).unwrap();
        assert_eq!(domains.len(), 2);
        assert_eq!(read_rapl_counter(&domains[1]).unwrap(), 42);
        assert_eq!(domains[0].max_range_uj, 1000);
    }

    #[test]
    fn missing_root_names_path() {
        let err = discover_domains(Path::new("/nonexistent/powercap")).unwrap_err();
        match err {
            Error::Backend { path, .. } => assert_eq!(path, Path::new("/nonexistent/powercap")),
            other => panic!("{other:?}"),
        }
    }
}
