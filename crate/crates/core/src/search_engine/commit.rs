//! Per-shard commit points and atomic file helpers.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::IndexError;

pub const COMMIT_FORMAT_VERSION: u32 = 1;

/// Durable snapshot of one shard: its live segments and deletions.
///
/// A tombstone `doc_id → seq` marks every copy of `doc_id` stored in a
/// segment whose id is below `seq` as deleted, so a re-indexed document
/// stays visible in the newer segment that holds it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitPoint {
    pub format_version: u32,
    pub shard_id: u32,
    pub commit_id: u64,
    pub live_segment_ids: Vec<u64>,
    pub tombstones: BTreeMap<String, u64>,
}

impl CommitPoint {
    pub fn empty(shard_id: u32) -> Self {
        Self {
            format_version: COMMIT_FORMAT_VERSION,
            shard_id,
            ..Self::default()
        }
    }

    pub fn is_deleted(&self, doc_id: &str, segment_id: u64) -> bool {
        self.tombstones
            .get(doc_id)
            .is_some_and(|&seq| segment_id < seq)
    }
}

pub fn segment_file_name(segment_id: u64) -> String {
    format!("seg-{segment_id}.idx")
}

pub fn commit_file_name(commit_id: u64) -> String {
    format!("commit-{commit_id}.json")
}

/// Parses `seg-<n>.idx` / `commit-<n>.json` names.
pub(crate) fn parse_numbered(name: &str, prefix: &str, suffix: &str) -> Option<u64> {
    name.strip_prefix(prefix)?
        .strip_suffix(suffix)?
        .parse()
        .ok()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes to a temporary sibling, fsyncs, then renames into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IndexError> {
    let tmp = tmp_path(path);
    {
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))?;
    if let Some(dir) = path.parent() {
        // Persist the rename; not every platform allows opening a directory.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

pub(crate) fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, IndexError> {
    fs::read(path).map_err(io_err(path))
}

pub(crate) fn create_dir_all(path: &Path) -> Result<(), IndexError> {
    fs::create_dir_all(path).map_err(io_err(path))
}

pub(crate) fn list_dir(path: &Path) -> Result<Vec<String>, IndexError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(path).map_err(io_err(path))? {
        let entry = entry.map_err(io_err(path))?;
        if let Some(name) = entry.file_name().to_str() {
            names.push(name.to_string());
        }
    }
    names.sort();
    Ok(names)
}

pub(crate) fn remove_file(path: &Path) -> Result<(), IndexError> {
    match fs::remove_file(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(io_err(path)(e)),
    }
}
