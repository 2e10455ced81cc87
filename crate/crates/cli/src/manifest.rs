use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use rotorlab_core::TimeSeries;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    pub wall_time_s: f64,
    pub diagnostics: serde_json::Map<String, serde_json::Value>,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn file(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.path == name)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Output sink handed to an experiment.
#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<FileEntry>,
    pub diagnostics: serde_json::Map<String, serde_json::Value>,
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn new(dir: PathBuf) -> Self {
        RunOutput {
            dir,
            files: Vec::new(),
            diagnostics: serde_json::Map::new(),
            warnings: Vec::new(),
        }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Writes `<name>.csv`.
    pub fn series(&mut self, name: &str, s: &TimeSeries) -> CliResult<()> {
        self.write(&format!("{name}.csv"), s.to_csv().as_bytes())
    }

    pub fn diag(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.diagnostics.insert(key.to_string(), v);
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn finish(self, config: &RunConfig, wall_time_s: f64) -> CliResult<RunManifest> {
        let m = RunManifest {
            config: config.clone(),
            version: rotorlab_core::VERSION.to_string(),
            wall_time_s,
            diagnostics: self.diagnostics,
            warnings: self.warnings,
            files: self.files,
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        write_atomic(&self.dir.join(MANIFEST_NAME), text.as_bytes())?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn rewriting_a_file_replaces_its_entry() {
        let dir = std::env::temp_dir().join(format!("rotorlab-manifest-{}", std::process::id()));
        let mut out = RunOutput::new(dir.clone());
        out.write("a.txt", b"one").unwrap();
        out.write("a.txt", b"two").unwrap();
        assert_eq!(out.files.len(), 1);
        assert_eq!(out.files[0].sha256, sha256_hex(b"two"));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
