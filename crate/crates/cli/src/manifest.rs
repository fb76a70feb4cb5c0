use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::RunError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// relative to the output directory
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance of one run. Timestamps live here and nowhere else, so every
/// other output file is byte-identical across reruns of the same config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub kind: String,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
    pub error: Option<String>,
    pub files: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Writes `contents` under `dir` and records its digest.
pub fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<FileRecord, RunError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| RunError::io(parent, e))?;
    }
    std::fs::write(&path, contents).map_err(|e| RunError::io(&path, e))?;
    Ok(FileRecord { path: name.into(), sha256: sha256_hex(contents), bytes: contents.len() as u64 })
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        write_file(dir, "manifest.json", s.as_bytes()).map(|_| ())
    }
}
