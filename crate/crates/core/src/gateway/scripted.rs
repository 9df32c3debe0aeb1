//! Deterministic backend: responses are a pure function of the request.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatRequest};
use crate::error::Error;

/// One script line. `fingerprint` matches a request exactly; otherwise all
/// set conditions must hold. Entries are tried in order and the first match
/// answers.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Substrings that must all occur somewhere in the conversation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    /// Substrings that must all occur in the final user message.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub last_contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub response: String,
}

impl ScriptEntry {
    pub fn for_fingerprint(fingerprint: impl Into<String>, response: impl Into<String>) -> Self {
        ScriptEntry {
            fingerprint: Some(fingerprint.into()),
            response: response.into(),
            ..Default::default()
        }
    }

    fn matches(&self, request: &ChatRequest, fingerprint: &str) -> bool {
        if let Some(fp) = &self.fingerprint {
            return fp == fingerprint;
        }
        if self.model.as_deref().is_some_and(|m| m != request.model.name) {
            return false;
        }
        if self.seed.is_some() && self.seed != request.params.seed {
            return false;
        }
        let last = request.last_user_content();
        if !self.last_contains.iter().all(|s| last.contains(s.as_str())) {
            return false;
        }
        self.contains
            .iter()
            .all(|s| request.messages.iter().any(|m| m.content.contains(s.as_str())))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Script {
    pub entries: Vec<ScriptEntry>,
}

impl Script {
    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("script {}: {e}", path.display())))
    }
}

pub type Responder = Arc<dyn Fn(&ChatRequest) -> Option<String> + Send + Sync>;

/// Scripted backend. The script table is consulted first, then the optional
/// responder closure.
#[derive(Clone, Default)]
pub struct ScriptedBackend {
    script: Script,
    responder: Option<Responder>,
}

impl fmt::Debug for ScriptedBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScriptedBackend")
            .field("entries", &self.script.entries.len())
            .field("responder", &self.responder.is_some())
            .finish()
    }
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        ScriptedBackend { script, responder: None }
    }

    pub fn from_fn(responder: impl Fn(&ChatRequest) -> Option<String> + Send + Sync + 'static) -> Self {
        ScriptedBackend {
            script: Script::default(),
            responder: Some(Arc::new(responder)),
        }
    }

    pub fn with_responder(mut self, responder: impl Fn(&ChatRequest) -> Option<String> + Send + Sync + 'static) -> Self {
        self.responder = Some(Arc::new(responder));
        self
    }
}

impl ChatBackend for ScriptedBackend {
    fn send(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let fingerprint = request.fingerprint();
        if let Some(entry) = self.script.entries.iter().find(|e| e.matches(request, &fingerprint)) {
            return Ok(entry.response.clone());
        }
        if let Some(text) = self.responder.as_ref().and_then(|r| r(request)) {
            return Ok(text);
        }
        Err(BackendError::Fatal(Error::Unscripted {
            fingerprint,
            model: request.model.name.clone(),
            preview: request.last_user_content().chars().take(200).collect(),
        }))
    }
}
