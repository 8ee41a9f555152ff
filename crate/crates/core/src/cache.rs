//! Local record of DOIs minted for software and data versions.
//!
//! Stored as one JSON document `{"records":[...]}`. Writes go through a
//! temporary file in the same directory followed by a rename. An advisory
//! lock on `<cache>.lock` admits one open cache per path at a time.

use std::fs::{File, OpenOptions, TryLockError};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("DOI cache {path} is corrupt ({message}); fix or remove it by hand")]
    Corrupt { path: PathBuf, message: String },
    #[error("DOI cache {path} is in use by another geopub process")]
    Locked { path: PathBuf },
    #[error("DOI cache {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Software,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub backend_name: String,
    pub artifact_kind: ArtifactKind,
    pub version_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoiCacheRecord {
    pub backend_name: String,
    pub artifact_kind: ArtifactKind,
    pub version_id: String,
    pub publication_id: u64,
    pub doi: String,
    pub created_at: DateTime<Utc>,
}

impl DoiCacheRecord {
    pub fn key(&self) -> CacheKey {
        CacheKey {
            backend_name: self.backend_name.clone(),
            artifact_kind: self.artifact_kind,
            version_id: self.version_id.clone(),
        }
    }

    fn matches(&self, key: &CacheKey) -> bool {
        self.backend_name == key.backend_name
            && self.artifact_kind == key.artifact_kind
            && self.version_id == key.version_id
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CacheDocument {
    records: Vec<DoiCacheRecord>,
}

/// Parses a cache document, rejecting duplicate keys.
pub fn parse_cache_str(text: &str) -> Result<Vec<DoiCacheRecord>, String> {
    let doc: CacheDocument = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut keys = std::collections::HashSet::new();
    for r in &doc.records {
        if !keys.insert(r.key()) {
            return Err(format!(
                "duplicate record for {} {:?} {}",
                r.backend_name, r.artifact_kind, r.version_id
            ));
        }
    }
    Ok(doc.records)
}

/// An open, locked cache file. The lock is released on drop.
#[derive(Debug)]
pub struct DoiCache {
    path: PathBuf,
    records: Vec<DoiCacheRecord>,
    _lock: File,
}

impl DoiCache {
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let io = |source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let mut lock_path = path.as_os_str().to_owned();
        lock_path.push(".lock");
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(io)?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => {
                return Err(CacheError::Locked {
                    path: path.to_path_buf(),
                })
            }
            Err(TryLockError::Error(e)) => return Err(io(e)),
        }

        let records = match std::fs::read_to_string(path) {
            Ok(text) => parse_cache_str(&text).map_err(|message| CacheError::Corrupt {
                path: path.to_path_buf(),
                message,
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io(e)),
        };
        Ok(DoiCache {
            path: path.to_path_buf(),
            records,
            _lock: lock,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[DoiCacheRecord] {
        &self.records
    }

    pub fn get(&self, key: &CacheKey) -> Option<&DoiCacheRecord> {
        self.records.iter().find(|r| r.matches(key))
    }

    /// Inserts or replaces the record with the same key and saves the file.
    pub fn put(&mut self, record: DoiCacheRecord) -> Result<(), CacheError> {
        let key = record.key();
        match self.records.iter_mut().find(|r| r.matches(&key)) {
            Some(slot) => *slot = record,
            None => self.records.push(record),
        }
        self.save()
    }

    fn save(&self) -> Result<(), CacheError> {
        let io = |source| CacheError::Io {
            path: self.path.clone(),
            source,
        };
        let dir = self
            .path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let doc = CacheDocument {
            records: self.records.clone(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        serde_json::to_writer_pretty(&mut tmp, &doc).map_err(|e| io(e.into()))?;
        tmp.write_all(b"\n").map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&self.path).map_err(|e| io(e.error))?;
        Ok(())
    }
}
