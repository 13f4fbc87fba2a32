use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub role: String,
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

/// Audit trail written next to each command's primary output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileRecord>,
    pub artifacts: Vec<FileRecord>,
    pub wall_clock_ms: u128,
}

pub fn sha256_file(path: &Path) -> CliResult<(u64, String)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok((bytes.len() as u64, format!("{:x}", Sha256::digest(&bytes))))
}

pub fn record(role: &str, path: &Path) -> CliResult<FileRecord> {
    let (bytes, sha256) = sha256_file(path)?;
    Ok(FileRecord { role: role.to_string(), path: path.to_path_buf(), bytes, sha256 })
}

/// `<primary>.manifest.json`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary.with_file_name(name)
}

impl RunManifest {
    pub fn write(&self, primary: &Path) -> CliResult<PathBuf> {
        let path = manifest_path(primary);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
