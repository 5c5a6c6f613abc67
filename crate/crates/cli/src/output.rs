//! Output-directory contract: everything is written into a staging
//! directory next to the target and moved into place only on success.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, StageExt};

pub const MANIFEST_JSON: &str = "manifest.json";
pub const TOOL: &str = "ecobench";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStatus {
    pub name: String,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub stages: Vec<StageStatus>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_JSON);
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::data("manifest", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::data("manifest", format!("{}: {e}", path.display())))
    }

    pub fn file(&self, rel: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.path == rel)
    }

    /// Re-hashes every listed file.
    pub fn verify(&self, dir: &Path) -> CliResult<()> {
        for f in &self.files {
            let (digest, bytes) =
                digest_file(&dir.join(&f.path)).map_err(|e| CliError::data("manifest", format!("{}: {e}", f.path)))?;
            if digest != f.sha256 || bytes != f.bytes {
                return Err(CliError::data(
                    "manifest",
                    format!("{} does not match its recorded digest", f.path),
                ));
            }
        }
        Ok(())
    }
}

pub fn digest_file(path: &Path) -> std::io::Result<(String, u64)> {
    let bytes = fs::read(path)?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// A run in progress. Dropping it without [`Staging::commit`] removes the
/// staging directory.
pub struct Staging {
    dir: PathBuf,
    target: PathBuf,
    stages: Vec<StageStatus>,
    committed: bool,
}

impl Staging {
    /// Refuses to replace a non-empty directory that is not an earlier run.
    pub fn begin(target: &Path) -> CliResult<Self> {
        if target.exists() {
            if !target.is_dir() {
                return Err(CliError::usage(
                    "output",
                    format!("{} exists and is not a directory", target.display()),
                ));
            }
            let empty = fs::read_dir(target).stage("output")?.next().is_none();
            if !empty && !target.join(MANIFEST_JSON).is_file() {
                return Err(CliError::usage(
                    "output",
                    format!(
                        "{} is not empty and holds no previous run; refusing to replace it",
                        target.display()
                    ),
                ));
            }
        }
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).stage("output")?;
        let dir = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).stage("output")?;
        }
        fs::create_dir_all(&dir).stage("output")?;
        Ok(Self {
            dir,
            target: target.to_path_buf(),
            stages: Vec::new(),
            committed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn stage_done(&mut self, name: &str) {
        self.stages.push(StageStatus {
            name: name.to_string(),
            status: "ok".into(),
        });
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> CliResult<PathBuf> {
        let path = self.dir.join(rel);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime("output", e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).stage("output")?;
        Ok(path)
    }

    /// Writes the manifest over every file in the staging directory and
    /// moves it into place.
    pub fn commit(mut self, command: &str, config: serde_json::Value) -> CliResult<RunManifest> {
        let mut files = Vec::new();
        collect_files(&self.dir, &self.dir, &mut files).stage("output")?;
        files.sort();
        let files = files
            .into_iter()
            .map(|rel| {
                let (sha256, bytes) = digest_file(&self.dir.join(&rel))?;
                Ok(FileEntry {
                    path: rel,
                    sha256,
                    bytes,
                })
            })
            .collect::<std::io::Result<Vec<_>>>()
            .stage("output")?;
        let manifest = RunManifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            stages: std::mem::take(&mut self.stages),
            files,
        };
        self.write_json(MANIFEST_JSON, &manifest)?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target).stage("output")?;
        }
        fs::rename(&self.dir, &self.target).stage("output")?;
        self.committed = true;
        Ok(manifest)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("under root");
            out.push(
                rel.components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/"),
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_lists_and_verifies_files() {
        let tmp = tempfile::tempdir().unwrap();
        let target = tmp.path().join("run");
        let staging = Staging::begin(&target).unwrap();
        fs::create_dir(staging.dir().join("sub")).unwrap();
        fs::write(staging.dir().join("sub/a.csv"), "x\n1\n").unwrap();
        let m = staging.commit("test", serde_json::json!({})).unwrap();
        assert_eq!(m.files.len(), 1);
        assert_eq!(m.files[0].path, "sub/a.csv");
        let back = RunManifest::read(&target).unwrap();
        assert_eq!(back, m);
        back.verify(&target).unwrap();
        fs::write(target.join("sub/a.csv"), "x\n2\n").unwrap();
        assert!(back.verify(&target).is_err());
    }

    #[test]
    fn dropped_staging_leaves_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        let target = tmp.path().join("run");
        {
            let staging = Staging::begin(&target).unwrap();
            fs::write(staging.dir().join("partial.csv"), "x").unwrap();
        }
        assert!(!target.exists());
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
    }

    #[test]
    fn foreign_directory_is_not_replaced() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("notes.txt"), "keep").unwrap();
        assert_eq!(Staging::begin(tmp.path()).err().unwrap().exit_code(), 1);
        assert!(tmp.path().join("notes.txt").exists());
    }
}
