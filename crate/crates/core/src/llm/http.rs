use std::time::Duration;

use serde_json::{json, Value};

use super::{CompletionRequest, LlmBackend, LlmError};

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpConfig {
    pub const DEFAULT_BASE_URL: &'static str = "https://api.openai.com/v1";

    /// Reads `LLM_BASE_URL` and `LLM_API_KEY`.
    pub fn from_env() -> Self {
        HttpConfig {
            base_url: std::env::var("LLM_BASE_URL").unwrap_or_else(|_| Self::DEFAULT_BASE_URL.to_string()),
            api_key: std::env::var("LLM_API_KEY").ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(60),
        }
    }
}

/// OpenAI-compatible `POST {base_url}/chat/completions`.
pub struct HttpBackend {
    agent: ureq::Agent,
    config: HttpConfig,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        HttpBackend { agent, config }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }
}

pub(crate) fn wire_body(request: &CompletionRequest) -> Value {
    let messages: Vec<Value> = request
        .messages
        .iter()
        .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
        .collect();
    json!({
        "model": request.model_tag,
        "messages": messages,
        "temperature": request.temperature,
        "max_tokens": request.max_output_tokens,
    })
}

pub(crate) fn extract_content(body: &Value) -> Result<String, LlmError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or(LlmError::ResponseEmpty)
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let mut call = self.agent.post(&self.endpoint());
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(wire_body(request)).map_err(|e| match e {
            ureq::Error::StatusCode(code) => LlmError::BackendUnavailable {
                retryable: code == 429 || code >= 500,
                message: format!("HTTP {code}"),
            },
            other => LlmError::BackendUnavailable { retryable: true, message: other.to_string() },
        })?;
        let body: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::BackendUnavailable { retryable: false, message: format!("bad response body: {e}") })?;
        extract_content(&body)
    }
}
