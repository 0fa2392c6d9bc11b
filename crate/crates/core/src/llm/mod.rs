//! The one seam every model call goes through.
//!
//! A [`Gateway`] validates requests, counts calls, applies a single retry on
//! transient failures, and delegates to an [`LlmBackend`]. Three backends ship
//! with the crate:
//!
//! * [`HttpBackend`]: OpenAI-compatible chat completions over HTTP.
//! * [`ReplayBackend`]: answers from a fixture directory, never touches the network.
//! * [`RecordingBackend`]: wraps another backend and stores each new exchange.
//!
//! Fixtures are keyed by a digest of the canonical request serialization, not
//! by call order, so retries and reordered calls still hit their recordings.

mod fixtures;
mod http;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use fixtures::{FixtureRecord, FixtureStore, RecordingBackend, ReplayBackend};
pub use http::{HttpBackend, HttpConfig};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend unavailable (retryable: {retryable}): {message}")]
    BackendUnavailable { retryable: bool, message: String },
    #[error("no recorded fixture for request {digest}\n{request_dump}")]
    FixtureMiss { digest: FixtureKey, request_dump: String },
    #[error("backend returned an empty response")]
    ResponseEmpty,
    #[error("fixture store: {0}")]
    FixtureStore(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub model_tag: String,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        let invalid = |m: &str| Err(LlmError::InvalidRequest(m.to_string()));
        match self.messages.first() {
            None => return invalid("no messages"),
            Some(m) if m.role != Role::System => return invalid("first message must be the system message"),
            _ => {}
        }
        if self.messages.iter().any(|m| m.content.is_empty()) {
            return invalid("message content must be non-empty");
        }
        if self.messages.windows(2).any(|w| w[0].role == Role::Assistant && w[1].role == Role::Assistant) {
            return invalid("two consecutive assistant messages");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return invalid("temperature must be within [0, 2]");
        }
        if self.max_output_tokens == 0 {
            return invalid("max_output_tokens must be positive");
        }
        Ok(())
    }

    /// Compact JSON with lexicographically ordered keys; content is byte-exact.
    pub fn canonical_json(&self) -> String {
        let text = |s: &str| serde_json::to_string(s).expect("strings always serialize");
        let messages: Vec<String> = self
            .messages
            .iter()
            .map(|m| format!("{{\"content\":{},\"role\":\"{}\"}}", text(&m.content), m.role.as_str()))
            .collect();
        format!(
            "{{\"max_output_tokens\":{},\"messages\":[{}],\"model_tag\":{},\"temperature\":{}}}",
            self.max_output_tokens,
            messages.join(","),
            text(&self.model_tag),
            serde_json::to_string(&self.temperature).expect("finite temperature"),
        )
    }
}

/// Hex SHA-256 of a request's canonical serialization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixtureKey(String);

impl FixtureKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for FixtureKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn canonical_digest(request: &CompletionRequest) -> FixtureKey {
    FixtureKey(hex::encode(Sha256::digest(request.canonical_json().as_bytes())))
}

/// Decoding parameters for one use of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub model_tag: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl LlmSettings {
    pub fn generation() -> Self {
        LlmSettings { model_tag: "gpt-3.5-turbo".into(), temperature: 0.2, max_output_tokens: 2048 }
    }

    pub fn chat() -> Self {
        LlmSettings { model_tag: "gpt-4".into(), temperature: 0.7, max_output_tokens: 200 }
    }

    pub fn request(&self, messages: Vec<ChatMessage>) -> CompletionRequest {
        CompletionRequest {
            messages,
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            model_tag: self.model_tag.clone(),
        }
    }
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings::generation()
    }
}

pub trait LlmBackend: Send + Sync {
    /// Returns the assistant's reply text.
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

impl LlmBackend for Box<dyn LlmBackend> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

/// Where model answers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    /// No model; callers fall back to canned text where they can.
    #[default]
    Off,
    Replay,
    Record,
    Live,
}

impl BackendMode {
    /// Builds the backend. Replay and record need a fixture directory.
    pub fn build(self, fixtures: Option<&std::path::Path>) -> Result<Option<Box<dyn LlmBackend>>, LlmError> {
        let need_dir = || fixtures.ok_or_else(|| LlmError::FixtureStore(format!("{self:?} mode needs a fixture directory")));
        Ok(match self {
            BackendMode::Off => None,
            BackendMode::Replay => Some(Box::new(ReplayBackend::open(need_dir()?)?)),
            BackendMode::Record => {
                let live = HttpBackend::new(HttpConfig::from_env());
                Some(Box::new(RecordingBackend::new(live, FixtureStore::new(need_dir()?))?))
            }
            BackendMode::Live => Some(Box::new(HttpBackend::new(HttpConfig::from_env()))),
        })
    }
}

/// Backend driven by a closure; handy for scripted tests and fixture authoring.
pub struct FnBackend<F>(pub F);

impl<F> LlmBackend for FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (self.0)(request)
    }
}

pub struct Gateway {
    backend: Box<dyn LlmBackend>,
    calls: AtomicUsize,
    max_retries: usize,
}

impl Gateway {
    pub fn new(backend: impl LlmBackend + 'static) -> Self {
        Gateway { backend: Box::new(backend), calls: AtomicUsize::new(0), max_retries: 1 }
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<ChatMessage, LlmError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut attempt = 0;
        let content = loop {
            match self.backend.complete(request) {
                Err(LlmError::BackendUnavailable { retryable: true, message }) if attempt < self.max_retries => {
                    tracing::warn!(%message, "transient backend failure, retrying");
                    attempt += 1;
                }
                other => break other?,
            }
        };
        if content.trim().is_empty() {
            return Err(LlmError::ResponseEmpty);
        }
        Ok(ChatMessage::assistant(content))
    }

    /// Number of logical `complete` calls accepted so far (retries excluded).
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}
