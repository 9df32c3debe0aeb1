//! OpenAI-compatible chat-completions client.

use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use super::{BackendError, ChatBackend, ChatRequest, Message};
use crate::error::Error;

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

pub struct LiveBackend {
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    pub fn new(timeout: Duration) -> crate::Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(LiveBackend { client })
    }
}

impl Default for LiveBackend {
    fn default() -> Self {
        LiveBackend::new(Duration::from_secs(120)).expect("default http client builds")
    }
}

pub(crate) fn completions_url(endpoint: &url::Url) -> String {
    format!("{}/chat/completions", endpoint.as_str().trim_end_matches('/'))
}

impl ChatBackend for LiveBackend {
    fn send(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let body = WireRequest {
            model: &request.model.name,
            messages: &request.messages,
            temperature: request.params.temperature,
            max_tokens: request.params.max_tokens,
            seed: request.params.seed,
        };
        let mut http = self.client.post(completions_url(&request.model.endpoint)).json(&body);
        if let Ok(key) = std::env::var(&request.model.api_key_env) {
            http = http.bearer_auth(key);
        }
        let response = http.send().map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(BackendError::Fatal(Error::Transport(format!("HTTP {status}: {detail}"))));
        }
        let payload: Value = response
            .json()
            .map_err(|e| BackendError::Transient(format!("unreadable response body: {e}")))?;
        let content = payload
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .unwrap_or_default();
        if content.trim().is_empty() {
            return Err(BackendError::Transient("empty completion".to_string()));
        }
        Ok(content.to_string())
    }
}
