//! Content-addressed record/replay cache: one file per request fingerprint.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatRequest};
use crate::error::Error;

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    fingerprint: String,
    model: String,
    response: String,
}

/// Serves cached responses and records misses from an inner backend. With no
/// inner backend a miss is an error, which makes a fixture directory a
/// closed world.
pub struct ReplayBackend {
    dir: PathBuf,
    inner: Option<Arc<dyn ChatBackend>>,
    write_lock: Mutex<()>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>, inner: Option<Arc<dyn ChatBackend>>) -> crate::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ReplayBackend {
            dir,
            inner,
            write_lock: Mutex::new(()),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    fn path_for(&self, fingerprint: &str) -> PathBuf {
        self.dir.join(format!("{fingerprint}.json"))
    }

    fn lookup(&self, fingerprint: &str) -> Option<String> {
        let text = fs::read_to_string(self.path_for(fingerprint)).ok()?;
        let record: CacheRecord = serde_json::from_str(&text).ok()?;
        (record.fingerprint == fingerprint).then_some(record.response)
    }

    fn store(&self, request: &ChatRequest, fingerprint: &str, response: &str) -> Result<(), BackendError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let record = CacheRecord {
            fingerprint: fingerprint.to_string(),
            model: request.model.name.clone(),
            response: response.to_string(),
        };
        let path = self.path_for(fingerprint);
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_vec_pretty(&record).expect("cache record serializes");
        fs::write(&tmp, body)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| BackendError::Fatal(Error::io(&path, e)))
    }
}

impl ChatBackend for ReplayBackend {
    fn send(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let fingerprint = request.fingerprint();
        if let Some(hit) = self.lookup(&fingerprint) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let inner = self.inner.as_ref().ok_or_else(|| {
            BackendError::Fatal(Error::NotFound(format!("replay cache has no entry for fingerprint {fingerprint}")))
        })?;
        let response = inner.send(request)?;
        self.store(request, &fingerprint, &response)?;
        Ok(response)
    }
}
