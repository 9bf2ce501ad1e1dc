//! Line-delimited JSON store of provider responses keyed by request fingerprint.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, CompletionResponse, GatewayError, Result};

/// One line of the cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub fingerprint: String,
    pub request: CompletionRequest,
    pub response: CompletionResponse,
}

/// Reads are concurrent; writes are serialized and appended to the file
/// before the entry becomes visible.
#[derive(Debug)]
pub struct ReplayCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, CompletionResponse>>,
    writer: Mutex<Option<BufWriter<File>>>,
}

impl ReplayCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    /// Loads `path` if it exists; new records are appended to it. When a
    /// fingerprint occurs twice, the first record wins.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let text = fs::read_to_string(path)?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let record: CacheRecord = serde_json::from_str(line).map_err(|e| GatewayError::CacheFormat {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                entries.entry(record.fingerprint).or_insert(record.response);
            }
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            writer: Mutex::new(None),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, fingerprint: &str) -> Option<CompletionResponse> {
        self.entries.read().expect("cache lock").get(fingerprint).cloned()
    }

    pub fn contains(&self, fingerprint: &str) -> bool {
        self.entries.read().expect("cache lock").contains_key(fingerprint)
    }

    /// Stores `response` for `request`; an existing entry is left untouched.
    pub fn insert(&self, request: &CompletionRequest, response: &CompletionResponse) -> Result<()> {
        let fingerprint = request.fingerprint();
        let mut writer = self.writer.lock().expect("cache writer lock");
        if self.contains(&fingerprint) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            if writer.is_none() {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                let file = OpenOptions::new().create(true).append(true).open(path)?;
                *writer = Some(BufWriter::new(file));
            }
            let w = writer.as_mut().expect("writer opened above");
            let record = CacheRecord {
                fingerprint: fingerprint.clone(),
                request: request.clone(),
                response: response.clone(),
            };
            serde_json::to_writer(&mut *w, &record).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.entries
            .write()
            .expect("cache lock")
            .insert(fingerprint, response.clone());
        Ok(())
    }
}
