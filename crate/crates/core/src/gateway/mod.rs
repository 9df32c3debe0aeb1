//! Uniform chat-completion access: live HTTP, scripted, and replay-cached
//! backends behind one `Gateway` with retries, per-model concurrency limits,
//! structured-output extraction and a call log.

mod json;
mod live;
mod replay;
mod scripted;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use url::Url;

pub use json::{extract_json_object, value_text};
pub use live::LiveBackend;
pub use replay::ReplayBackend;
pub use scripted::{Responder, Script, ScriptEntry, ScriptedBackend};

use crate::error::{Error, Result};

/// Appended when a structured response fails to parse.
pub const JSON_ONLY_INSTRUCTION: &str = "Please respond with valid JSON only, no extra tokens should be added.";

/// An opaque reference to a deployed chat model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawModelRef")]
pub struct ModelRef {
    pub name: String,
    pub endpoint: Url,
    pub api_key_env: String,
}

#[derive(Deserialize)]
struct RawModelRef {
    name: String,
    endpoint: String,
    #[serde(default = "default_key_env")]
    api_key_env: String,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}

impl TryFrom<RawModelRef> for ModelRef {
    type Error = Error;

    fn try_from(raw: RawModelRef) -> Result<Self> {
        ModelRef::new(raw.name, &raw.endpoint, raw.api_key_env)
    }
}

impl ModelRef {
    pub fn new(name: impl Into<String>, endpoint: &str, api_key_env: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::Config("model name must be non-empty".into()));
        }
        let endpoint = Url::parse(endpoint).map_err(|e| Error::Config(format!("endpoint `{endpoint}`: {e}")))?;
        Ok(ModelRef {
            name,
            endpoint,
            api_key_env: api_key_env.into(),
        })
    }

    /// A reference for use with scripted or replay backends, which never
    /// touch the endpoint.
    pub fn scripted(name: &str) -> Self {
        ModelRef::new(name, "http://scripted.invalid/v1", "NO_KEY").expect("static endpoint parses")
    }
}

impl fmt::Display for ModelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SamplingParams {
    pub const MAX_TEMPERATURE: f64 = 2.0;
    pub const MAX_TOKENS: u32 = 32768;

    /// Judging samples need diversity for voting.
    pub fn judging() -> Self {
        SamplingParams {
            temperature: 0.7,
            max_tokens: 1024,
            seed: None,
        }
    }

    pub fn answering(max_tokens: u32) -> Self {
        SamplingParams {
            temperature: 0.0,
            max_tokens,
            seed: None,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SamplingParams { seed: Some(seed), ..self }
    }

    pub fn with_max_tokens(self, max_tokens: u32) -> Self {
        SamplingParams { max_tokens, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=Self::MAX_TEMPERATURE).contains(&self.temperature) {
            return Err(Error::Parameter(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_tokens == 0 || self.max_tokens > Self::MAX_TOKENS {
            return Err(Error::Parameter(format!("max_tokens {} outside [1, 32768]", self.max_tokens)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: ModelRef,
    pub messages: Vec<Message>,
    pub params: SamplingParams,
}

impl ChatRequest {
    /// Stable hex SHA-256 over the model name, every message's bytes, and the
    /// sampling parameters. Each field is length-prefixed so no two distinct
    /// requests share a preimage.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        let mut field = |bytes: &[u8]| {
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(bytes);
        };
        field(self.model.name.as_bytes());
        for message in &self.messages {
            field(message.role.as_str().as_bytes());
            field(message.content.as_bytes());
        }
        field(&self.params.temperature.to_bits().to_le_bytes());
        field(&self.params.max_tokens.to_le_bytes());
        match self.params.seed {
            Some(seed) => field(&seed.to_le_bytes()),
            None => field(b"none"),
        }
        hex::encode(hasher.finalize())
    }

    pub fn last_user_content(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

/// Failure from a single backend attempt. Only `Transient` is retried.
#[derive(Debug)]
pub enum BackendError {
    Transient(String),
    Fatal(Error),
}

pub trait ChatBackend: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each following retry.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn delay_before_retry(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

/// One completed or failed gateway call.
#[derive(Debug, Clone, PartialEq)]
pub struct CallRecord {
    pub model: String,
    pub fingerprint: String,
    pub prompt: String,
    pub response: Option<String>,
}

/// Counting semaphore per model name.
struct Limiter {
    capacity: usize,
    in_flight: Mutex<HashMap<String, usize>>,
    freed: Condvar,
}

struct Permit<'a> {
    limiter: &'a Limiter,
    key: String,
}

impl Limiter {
    fn new(capacity: usize) -> Self {
        Limiter {
            capacity: capacity.max(1),
            in_flight: Mutex::new(HashMap::new()),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self, key: &str) -> Permit<'_> {
        let mut guard = self.in_flight.lock().unwrap_or_else(|p| p.into_inner());
        loop {
            let count = guard.entry(key.to_string()).or_insert(0);
            if *count < self.capacity {
                *count += 1;
                break;
            }
            guard = self.freed.wait(guard).unwrap_or_else(|p| p.into_inner());
        }
        Permit { limiter: self, key: key.to_string() }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut guard = self.limiter.in_flight.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(count) = guard.get_mut(&self.key) {
            *count -= 1;
        }
        self.limiter.freed.notify_all();
    }
}

pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    retry: RetryPolicy,
    limiter: Limiter,
    log: Mutex<Vec<CallRecord>>,
}

impl Gateway {
    pub const DEFAULT_CONCURRENCY: usize = 4;

    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Gateway {
            backend,
            retry: RetryPolicy::default(),
            limiter: Limiter::new(Self::DEFAULT_CONCURRENCY),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn scripted(backend: ScriptedBackend) -> Self {
        Gateway::new(Arc::new(backend))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_concurrency(mut self, per_model: usize) -> Self {
        self.limiter = Limiter::new(per_model);
        self
    }

    pub fn call_log(&self) -> Vec<CallRecord> {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn clear_log(&self) {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clear();
    }

    /// Returns the assistant text for one chat request.
    pub fn complete(&self, model: &ModelRef, messages: &[Message], params: &SamplingParams) -> Result<String> {
        if messages.is_empty() {
            return Err(Error::Parameter("messages must be non-empty".into()));
        }
        if messages.last().map(|m| m.role) != Some(Role::User) {
            return Err(Error::Parameter("the last message must have role `user`".into()));
        }
        params.validate()?;
        let request = ChatRequest {
            model: model.clone(),
            messages: messages.to_vec(),
            params: *params,
        };
        let outcome = self.send_with_retries(&request);
        self.log.lock().unwrap_or_else(|p| p.into_inner()).push(CallRecord {
            model: model.name.clone(),
            fingerprint: request.fingerprint(),
            prompt: request.last_user_content().to_string(),
            response: outcome.as_ref().ok().cloned(),
        });
        outcome
    }

    fn send_with_retries(&self, request: &ChatRequest) -> Result<String> {
        let _permit = self.limiter.acquire(&request.model.name);
        let mut retry = 0;
        loop {
            match self.backend.send(request) {
                Ok(text) if text.trim().is_empty() => {
                    if retry >= self.retry.max_retries {
                        return Err(Error::Transport("empty completion".into()));
                    }
                }
                Ok(text) => return Ok(text),
                Err(BackendError::Fatal(err)) => return Err(err),
                Err(BackendError::Transient(reason)) => {
                    if retry >= self.retry.max_retries {
                        return Err(Error::Transport(format!(
                            "{reason} (gave up after {} attempts)",
                            retry + 1
                        )));
                    }
                    tracing::warn!(model = %request.model, retry, %reason, "transient gateway failure");
                }
            }
            std::thread::sleep(self.retry.delay_before_retry(retry));
            retry += 1;
        }
    }

    /// Completes and extracts a JSON object holding every required key.
    ///
    /// Keys are matched exactly first, then case-insensitively; the returned
    /// map always carries them under the requested spelling. A response that
    /// does not parse (or lacks a key) is re-asked once with an explicit
    /// JSON-only instruction.
    pub fn complete_structured(
        &self,
        model: &ModelRef,
        messages: &[Message],
        params: &SamplingParams,
        required_keys: &[&str],
    ) -> Result<Map<String, Value>> {
        if required_keys.is_empty() {
            return Err(Error::Parameter("required_keys must be non-empty".into()));
        }
        let first = self.complete(model, messages, params)?;
        if let Some(Ok(map)) = extract_json_object(&first).map(|m| normalize_keys(m, required_keys)) {
            return Ok(map);
        }
        let mut retry_messages = messages.to_vec();
        retry_messages.push(Message::assistant(first.clone()));
        retry_messages.push(Message::user(JSON_ONLY_INSTRUCTION));
        let second = self.complete(model, &retry_messages, params)?;
        match extract_json_object(&second) {
            Some(map) => normalize_keys(map, required_keys),
            None => Err(Error::StructuredOutput { first, second }),
        }
    }
}

fn normalize_keys(mut map: Map<String, Value>, required: &[&str]) -> Result<Map<String, Value>> {
    for key in required {
        if map.contains_key(*key) {
            continue;
        }
        let wanted = squash(key);
        let found = map.keys().find(|k| squash(k) == wanted).cloned();
        match found {
            Some(actual) => {
                let value = map.remove(&actual).expect("key just found");
                map.insert(key.to_string(), value);
            }
            None => return Err(Error::MissingKey { key: key.to_string() }),
        }
    }
    Ok(map)
}

fn squash(key: &str) -> String {
    key.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}
