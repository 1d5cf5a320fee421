//! Persistent call cache: an append-only file of request-keyed
//! responses. At temperature 0 responses for the same key are identical
//! by construction, so last-writer-wins on duplicate keys is safe.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, CompletionBackend, CompletionRequest, CompletionResponse};

/// One cached call, as stored on disk (one JSON record per line).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallCacheEntry {
    pub key: String,
    pub response: CompletionResponse,
    pub created_at: DateTime<Utc>,
}

/// Digest of the request content plus the model identity. A pure
/// function of its inputs: identical requests against the same model
/// always hit the same entry.
pub fn cache_key(request: &CompletionRequest, model_id: &str) -> String {
    #[derive(Serialize)]
    struct KeyMaterial<'a> {
        prompt: &'a str,
        max_new_tokens: u32,
        temperature: f64,
        stop_sequences: &'a [String],
        model_id: &'a str,
    }
    let material = serde_json::to_vec(&KeyMaterial {
        prompt: &request.prompt,
        max_new_tokens: request.max_new_tokens,
        temperature: request.temperature,
        stop_sequences: &request.stop_sequences,
        model_id,
    })
    .expect("key material serializes");
    hex::encode(Sha256::digest(&material))
}

/// Wraps any backend with a persistent response cache. A hit returns the
/// stored response with `cached = true` and performs no inner call.
pub struct CachingBackend<B> {
    inner: B,
    path: PathBuf,
    entries: Mutex<HashMap<String, CompletionResponse>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<B: CompletionBackend> CachingBackend<B> {
    /// Opens (or creates) the cache file and loads existing entries.
    pub fn open(inner: B, path: &Path) -> Result<Self, BackendError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = std::fs::File::open(path).map_err(|source| BackendError::CacheIo {
                path: path.display().to_string(),
                source,
            })?;
            for (lineno, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|source| BackendError::CacheIo {
                    path: path.display().to_string(),
                    source,
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CallCacheEntry =
                    serde_json::from_str(&line).map_err(|e| BackendError::CacheRecord {
                        path: path.display().to_string(),
                        line: lineno + 1,
                        message: e.to_string(),
                    })?;
                entries.insert(entry.key, entry.response);
            }
        }
        Ok(Self {
            inner,
            path: path.to_path_buf(),
            entries: Mutex::new(entries),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }

    /// Number of calls that went through to the wrapped backend.
    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.lock().unwrap().is_empty()
    }

    fn append(&self, entry: &CallCacheEntry) -> Result<(), BackendError> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|source| BackendError::CacheIo {
                path: self.path.display().to_string(),
                source,
            })?;
        let mut line = serde_json::to_string(entry).expect("cache entry serializes");
        line.push('\n');
        file.write_all(line.as_bytes())
            .map_err(|source| BackendError::CacheIo {
                path: self.path.display().to_string(),
                source,
            })
    }
}

impl<B: CompletionBackend> CompletionBackend for CachingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        request.validate()?;
        let key = cache_key(request, &self.inner.identity());
        if let Some(stored) = self.entries.lock().unwrap().get(&key) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            let mut response = stored.clone();
            response.cached = true;
            return Ok(response);
        }
        self.misses.fetch_add(1, Ordering::SeqCst);
        let response = self.inner.complete(request)?;
        let mut stored = response.clone();
        stored.cached = false;
        let entry = CallCacheEntry {
            key: key.clone(),
            response: stored.clone(),
            created_at: Utc::now(),
        };
        self.append(&entry)?;
        self.entries.lock().unwrap().insert(key, stored);
        Ok(response)
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}

/// Reads all entries from a cache file, newest last.
pub fn read_cache_file(path: &Path) -> Result<Vec<CallCacheEntry>, BackendError> {
    let file = std::fs::File::open(path).map_err(|source| BackendError::CacheIo {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| BackendError::CacheIo {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CallCacheEntry =
            serde_json::from_str(&line).map_err(|e| BackendError::CacheRecord {
                path: path.display().to_string(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ScriptedBackend, ScriptedRule};

    #[test]
    fn second_identical_request_is_cached() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let inner = ScriptedBackend::new(vec![ScriptedRule::new("That number is", "2")]);
        let backend = CachingBackend::open(inner, &path).unwrap();
        let req = CompletionRequest::new("That number is ", "t");
        let first = backend.complete(&req).unwrap();
        assert!(!first.cached);
        assert_eq!(first.text, "2");
        let second = backend.complete(&req).unwrap();
        assert!(second.cached);
        assert_eq!(second.text, first.text);
        assert_eq!(backend.hits(), 1);
        assert_eq!(backend.misses(), 1);
    }

    #[test]
    fn cache_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let req = CompletionRequest::new("That number is ", "t");
        {
            let inner = ScriptedBackend::new(vec![ScriptedRule::new("That number is", "2")]);
            let backend = CachingBackend::open(inner, &path).unwrap();
            backend.complete(&req).unwrap();
        }
        // Same script (and so the same identity): the cache answers and
        // the inner backend is never called.
        let inner = std::sync::Arc::new(ScriptedBackend::new(vec![ScriptedRule::new(
            "That number is",
            "2",
        )]));
        let backend = CachingBackend::open(std::sync::Arc::clone(&inner), &path).unwrap();
        let resp = backend.complete(&req).unwrap();
        assert!(resp.cached);
        assert_eq!(resp.text, "2");
        assert_eq!(backend.misses(), 0);
        assert_eq!(inner.calls(), 0);
    }

    #[test]
    fn key_depends_on_model_identity() {
        let req = CompletionRequest::new("prompt", "t");
        assert_ne!(cache_key(&req, "model-a"), cache_key(&req, "model-b"));
        assert_eq!(cache_key(&req, "model-a"), cache_key(&req, "model-a"));
    }
}
