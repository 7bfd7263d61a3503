use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{cache_key, check_messages, BackendError, ChatBackend, ChatMessage, ChatParams};

/// One line of the replay cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub key: String,
    pub model: String,
    pub response: String,
    pub created_at: String,
}

struct StoreInner {
    entries: HashMap<String, String>,
    file: File,
}

/// Append-only key → response store backed by a JSONL file.
pub struct ReplayStore {
    path: PathBuf,
    inner: Mutex<StoreInner>,
}

impl ReplayStore {
    /// Opens (creating if needed) and loads the store. Unparseable lines,
    /// such as a torn final write, are skipped with a warning. The first
    /// record for a key wins.
    pub fn open(path: &Path) -> Result<ReplayStore, BackendError> {
        let io = |e: std::io::Error| BackendError::Store(format!("{}: {e}", path.display()));
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<ReplayRecord>(&line) {
                    Ok(r) => {
                        entries.entry(r.key).or_insert(r.response);
                    }
                    Err(e) => warn!(line = n + 1, error = %e, path = %path.display(), "skipping corrupt replay record"),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok(ReplayStore {
            path: path.to_path_buf(),
            inner: Mutex::new(StoreInner { entries, file }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.inner.lock().unwrap().entries.get(key).cloned()
    }

    /// Appends a record unless the key is already present.
    pub fn insert(&self, key: &str, model: &str, response: &str) -> Result<(), BackendError> {
        let mut inner = self.inner.lock().unwrap();
        if inner.entries.contains_key(key) {
            return Ok(());
        }
        let record = ReplayRecord {
            key: key.to_string(),
            model: model.to_string(),
            response: response.to_string(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        inner
            .file
            .write_all(line.as_bytes())
            .and_then(|_| inner.file.flush())
            .map_err(|e| BackendError::Store(format!("{}: {e}", self.path.display())))?;
        inner.entries.insert(record.key, record.response);
        Ok(())
    }
}

/// Memoizing wrapper. In strict mode a miss is an error and the inner
/// backend is never consulted.
pub struct ReplayBackend {
    store: Arc<ReplayStore>,
    inner: Option<Arc<dyn ChatBackend>>,
    strict: bool,
}

impl ReplayBackend {
    pub fn new(store: Arc<ReplayStore>, inner: Option<Arc<dyn ChatBackend>>, strict: bool) -> Self {
        ReplayBackend { store, inner, strict }
    }

    pub fn store(&self) -> &ReplayStore {
        &self.store
    }
}

#[async_trait]
impl ChatBackend for ReplayBackend {
    async fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError> {
        check_messages(messages)?;
        let key = cache_key(messages, params);
        if let Some(hit) = self.store.get(&key) {
            return Ok(hit);
        }
        let inner = match (&self.inner, self.strict) {
            (Some(inner), false) => inner,
            _ => return Err(BackendError::ReplayMiss { key }),
        };
        let response = inner.chat(messages, params).await?;
        self.store.insert(&key, &params.model, &response)?;
        Ok(response)
    }
}
