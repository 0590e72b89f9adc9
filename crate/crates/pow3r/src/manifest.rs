//! Run manifests: every command writes exactly one `manifest.json` into its
//! output directory, recording the command, the effective configuration
//! digest, a digest of every file read or written, the seed, the tool
//! version, and wall-clock timestamps.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn digest_file(path: impl AsRef<Path>) -> Result<FileDigest> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Collects digests while a command runs, then writes the manifest.
#[derive(Debug)]
pub struct ManifestBuilder {
    command: String,
    config_digest: String,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    started_unix: u64,
}

impl ManifestBuilder {
    /// `config` is the effective configuration serialized to canonical JSON.
    pub fn new(command: &str, config_json: &str, seed: Option<u64>) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config_digest: sha256_hex(config_json.as_bytes()),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix: now_unix(),
        }
    }

    pub fn record_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.inputs.push(digest_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.outputs.push(digest_file(path)?);
        Ok(())
    }

    /// Writes `manifest.json` into `out_dir` and returns its path.
    pub fn write(mut self, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
        self.inputs.sort();
        self.outputs.sort();
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: self.config_digest,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            started_unix: self.started_unix,
            finished_unix: now_unix(),
        };
        let path = out_dir.as_ref().join("manifest.json");
        let mut body = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Internal(e.to_string()))?;
        body.push('\n');
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
