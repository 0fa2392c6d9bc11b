use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{canonical_digest, CompletionRequest, FixtureKey, LlmBackend, LlmError};

/// One stored exchange, written as `<digest>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureRecord {
    pub request: CompletionRequest,
    pub response: String,
    pub recorded_at: String,
}

/// A directory holding one JSON file per request digest.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &FixtureKey) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Loads every fixture, checking that each file name matches its request digest.
    pub fn load_all(&self) -> Result<HashMap<FixtureKey, FixtureRecord>, LlmError> {
        let mut out = HashMap::new();
        if !self.dir.exists() {
            return Ok(out);
        }
        let entries = fs::read_dir(&self.dir).map_err(|e| store_err(&self.dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| store_err(&self.dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| store_err(&path, e))?;
            let record: FixtureRecord = serde_json::from_slice(&bytes)
                .map_err(|e| LlmError::FixtureStore(format!("{}: {e}", path.display())))?;
            let key = canonical_digest(&record.request);
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if stem != key.as_str() {
                return Err(LlmError::FixtureStore(format!(
                    "{} holds a request whose digest is {key}",
                    path.display()
                )));
            }
            out.insert(key, record);
        }
        Ok(out)
    }

    pub fn write(&self, record: &FixtureRecord) -> Result<FixtureKey, LlmError> {
        fs::create_dir_all(&self.dir).map_err(|e| store_err(&self.dir, e))?;
        let key = canonical_digest(&record.request);
        let path = self.path_for(&key);
        let tmp = path.with_extension("json.tmp");
        let mut body = serde_json::to_vec_pretty(record).map_err(|e| LlmError::FixtureStore(e.to_string()))?;
        body.push(b'\n');
        fs::write(&tmp, body).map_err(|e| store_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| store_err(&path, e))?;
        Ok(key)
    }
}

fn store_err(path: &Path, e: std::io::Error) -> LlmError {
    LlmError::FixtureStore(format!("{}: {e}", path.display()))
}

/// Serves responses from recorded fixtures only.
pub struct ReplayBackend {
    fixtures: HashMap<FixtureKey, FixtureRecord>,
}

impl ReplayBackend {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        Ok(ReplayBackend { fixtures: FixtureStore::new(dir).load_all()? })
    }

    pub fn from_records(records: impl IntoIterator<Item = FixtureRecord>) -> Self {
        let fixtures = records.into_iter().map(|r| (canonical_digest(&r.request), r)).collect();
        ReplayBackend { fixtures }
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let digest = canonical_digest(request);
        match self.fixtures.get(&digest) {
            Some(record) => Ok(record.response.clone()),
            None => Err(LlmError::FixtureMiss {
                request_dump: serde_json::to_string_pretty(request).unwrap_or_default(),
                digest,
            }),
        }
    }
}

type Timestamp = Box<dyn Fn() -> String + Send + Sync>;

/// Answers from the store when possible, otherwise asks `inner` and stores the reply.
pub struct RecordingBackend {
    inner: Box<dyn LlmBackend>,
    store: FixtureStore,
    cache: RwLock<HashMap<FixtureKey, String>>,
    write_lock: Mutex<()>,
    timestamp: Timestamp,
}

impl RecordingBackend {
    pub fn new(inner: impl LlmBackend + 'static, store: FixtureStore) -> Result<Self, LlmError> {
        let cache = store.load_all()?.into_iter().map(|(k, r)| (k, r.response)).collect();
        Ok(RecordingBackend {
            inner: Box::new(inner),
            store,
            cache: RwLock::new(cache),
            write_lock: Mutex::new(()),
            timestamp: Box::new(now_rfc3339),
        })
    }

    /// Overrides the `recorded_at` value written into new fixtures.
    pub fn with_timestamp(mut self, f: impl Fn() -> String + Send + Sync + 'static) -> Self {
        self.timestamp = Box::new(f);
        self
    }

    pub fn recorded(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }
}

impl LlmBackend for RecordingBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let key = canonical_digest(request);
        if let Some(hit) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let response = self.inner.complete(request)?;
        let _guard = self.write_lock.lock().expect("write lock");
        if let Some(hit) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let record = FixtureRecord { request: request.clone(), response: response.clone(), recorded_at: (self.timestamp)() };
        self.store.write(&record)?;
        self.cache.write().expect("cache lock").insert(key, response.clone());
        Ok(response)
    }
}

fn now_rfc3339() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;
    use crate::llm::{ChatMessage, FnBackend, Gateway};

    fn request(text: &str) -> CompletionRequest {
        CompletionRequest {
            messages: vec![ChatMessage::system("sys"), ChatMessage::user(text)],
            temperature: 0.2,
            max_output_tokens: 32,
            model_tag: "m".into(),
        }
    }

    #[test]
    fn replay_identity_and_miss() {
        let backend = ReplayBackend::from_records([FixtureRecord {
            request: request("R"),
            response: "Hello".into(),
            recorded_at: "2025-01-01T00:00:00Z".into(),
        }]);
        let gw = Gateway::new(backend);
        assert_eq!(gw.complete(&request("R")).unwrap().content, "Hello");
        match gw.complete(&request("unrecorded")) {
            Err(LlmError::FixtureMiss { digest, request_dump }) => {
                assert_eq!(digest, canonical_digest(&request("unrecorded")));
                assert!(request_dump.contains("unrecorded"));
            }
            other => panic!("expected a fixture miss, got {other:?}"),
        }
    }

    #[test]
    fn record_then_replay_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let upstream_calls = Arc::new(AtomicUsize::new(0));
        let counter = upstream_calls.clone();
        let inner = FnBackend(move |r: &CompletionRequest| {
            counter.fetch_add(1, Ordering::SeqCst);
            Ok(format!("echo: {}", r.messages[1].content))
        });
        let recorder = RecordingBackend::new(inner, FixtureStore::new(dir.path()))
            .unwrap()
            .with_timestamp(|| "2025-01-01T00:00:00Z".into());
        let gw = Gateway::new(recorder);
        assert_eq!(gw.complete(&request("a")).unwrap().content, "echo: a");
        assert_eq!(gw.complete(&request("a")).unwrap().content, "echo: a");
        assert_eq!(upstream_calls.load(Ordering::SeqCst), 1);
        assert_eq!(gw.call_count(), 2);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);

        let replay = Gateway::new(ReplayBackend::open(dir.path()).unwrap());
        assert_eq!(replay.complete(&request("a")).unwrap().content, "echo: a");
        let stored = FixtureStore::new(dir.path()).load_all().unwrap();
        let record = stored.values().next().unwrap();
        assert_eq!(record.recorded_at, "2025-01-01T00:00:00Z");
    }

    #[test]
    fn renamed_fixture_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let key = store
            .write(&FixtureRecord { request: request("x"), response: "y".into(), recorded_at: String::new() })
            .unwrap();
        fs::rename(store.path_for(&key), dir.path().join("bogus.json")).unwrap();
        assert!(matches!(store.load_all(), Err(LlmError::FixtureStore(_))));
    }
}
