use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::analytics::{RatingForm, Survey};
use crate::chat::ChatState;
use crate::engine::SessionState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub status: u16,
    pub body: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    /// Service clock reading at creation.
    pub created_at: u64,
    pub chat_state: ChatState,
    pub engine_state: Option<SessionState>,
    /// Service clock reading when playback started.
    pub engine_started_at: Option<u64>,
    pub ratings: Vec<RatingForm>,
    pub surveys: Vec<Survey>,
    /// Responses by `route#idempotency-key`.
    #[serde(default)]
    pub idempotency: BTreeMap<String, CachedResponse>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("session store I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt session record {id}: {detail}")]
    Corrupt { id: String, detail: String },
}

pub trait SessionStore: Send + Sync {
    fn load(&self, id: &str) -> Result<Option<SessionRecord>, StoreError>;
    fn save(&self, record: &SessionRecord) -> Result<(), StoreError>;
    /// All records, ordered by id.
    fn list(&self) -> Result<Vec<SessionRecord>, StoreError>;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    records: RwLock<BTreeMap<String, SessionRecord>>,
}

impl SessionStore for MemoryStore {
    fn load(&self, id: &str) -> Result<Option<SessionRecord>, StoreError> {
        Ok(self.records.read().expect("store lock").get(id).cloned())
    }

    fn save(&self, record: &SessionRecord) -> Result<(), StoreError> {
        self.records.write().expect("store lock").insert(record.session_id.clone(), record.clone());
        Ok(())
    }

    fn list(&self) -> Result<Vec<SessionRecord>, StoreError> {
        Ok(self.records.read().expect("store lock").values().cloned().collect())
    }
}

/// One JSON file per session, replaced atomically on each save.
#[derive(Debug)]
pub struct DirStore {
    dir: PathBuf,
}

impl DirStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(DirStore { dir })
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }
}

/// Ids safe to use as file names.
pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SessionStore for DirStore {
    fn load(&self, id: &str) -> Result<Option<SessionRecord>, StoreError> {
        if !valid_session_id(id) {
            return Ok(None);
        }
        match std::fs::read(self.path(id)) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| StoreError::Corrupt { id: id.to_string(), detail: e.to_string() }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn save(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let final_path = self.path(&record.session_id);
        let tmp = final_path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(record).expect("records serialize"))?;
        std::fs::rename(tmp, final_path)?;
        Ok(())
    }

    fn list(&self) -> Result<Vec<SessionRecord>, StoreError> {
        let mut ids: Vec<String> = std::fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str()?.strip_suffix(".json").map(str::to_string))
            .collect();
        ids.sort();
        ids.iter().filter_map(|id| self.load(id).transpose()).collect()
    }
}
