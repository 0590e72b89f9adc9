//! Append-only verdict cache for remote judging.
//!
//! Keys digest the (task id, rollout text, criterion id, backend config)
//! tuple; a hit returns the stored verdict byte-for-byte. The store is one
//! JSON record per line so interrupted runs lose at most the line being
//! written. Raw parsed verdicts are cached before any avoidance flip, so the
//! flip semantics stay with the rubric rather than the cache.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::rubric::Verdict;

/// Collision-resistant digest identifying one judged cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VerdictCacheKey(pub String);

impl VerdictCacheKey {
    pub fn new(task_id: &str, rollout_text: &str, criterion_id: &str, config_digest: &str) -> Self {
        let rollout_digest = sha256_hex(rollout_text.as_bytes());
        let material = format!("{task_id}\u{1f}{rollout_digest}\u{1f}{criterion_id}\u{1f}{config_digest}");
        VerdictCacheKey(sha256_hex(material.as_bytes()))
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    verdict: Verdict,
}

/// In-memory map backed by an append-only file. `open` replays the file;
/// `put` appends one line and flushes.
#[derive(Debug)]
pub struct VerdictCache {
    entries: BTreeMap<String, Verdict>,
    file: Option<File>,
    path: Option<PathBuf>,
}

impl VerdictCache {
    /// Purely in-memory cache (tests, one-shot runs).
    pub fn in_memory() -> Self {
        VerdictCache {
            entries: BTreeMap::new(),
            file: None,
            path: None,
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut entries = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
            for (no, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: no + 1,
                    message: e.to_string(),
                })?;
                entries.insert(rec.key, rec.verdict);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(VerdictCache {
            entries,
            file: Some(file),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn get(&self, key: &VerdictCacheKey) -> Option<&Verdict> {
        self.entries.get(&key.0)
    }

    pub fn put(&mut self, key: VerdictCacheKey, verdict: Verdict) -> Result<()> {
        if let Some(file) = self.file.as_mut() {
            let line = serde_json::to_string(&CacheRecord {
                key: key.0.clone(),
                verdict: verdict.clone(),
            })
            .map_err(|e| Error::Internal(e.to_string()))?;
            writeln!(file, "{line}").map_err(|e| {
                Error::io(self.path.clone().unwrap_or_default(), e)
            })?;
            file.flush()
                .map_err(|e| Error::io(self.path.clone().unwrap_or_default(), e))?;
        }
        self.entries.insert(key.0, verdict);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
