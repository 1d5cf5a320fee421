//! The LLM as a completion service.
//!
//! Every pipeline stage talks to a [`CompletionBackend`]: a remote HTTP
//! endpoint in production, a deterministic scripted double in tests, and
//! optionally a persistent call cache wrapped around either. The
//! multiple-choice helper [`choose_option`] turns free-form completions
//! into exactly one vocabulary option or an explicit abstention.

mod cache;
mod http;
mod scripted;

pub use cache::{read_cache_file, CachingBackend, CallCacheEntry};
pub use http::{HttpBackend, HttpBackendConfig};
pub use scripted::{ScriptedBackend, ScriptedRule};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::normalize_bare;
use crate::ontology::OptionLabel;

/// One request to the completion service. The tag names the pipeline
/// stage and node for logging and call accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
    pub tag: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, tag: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_new_tokens: 256,
            temperature: 0.0,
            stop_sequences: Vec::new(),
            tag: tag.into(),
        }
    }

    pub fn with_max_new_tokens(mut self, n: u32) -> Self {
        self.max_new_tokens = n;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_stop(mut self, stop: Vec<String>) -> Self {
        self.stop_sequences = stop;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.is_empty() {
            return Err(BackendError::EmptyPrompt {
                tag: self.tag.clone(),
            });
        }
        if self.max_new_tokens == 0 {
            return Err(BackendError::ZeroTokenBudget {
                tag: self.tag.clone(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency_ms: u64,
    pub cached: bool,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("empty prompt (tag {tag})")]
    EmptyPrompt { tag: String },
    #[error("max_new_tokens must be >= 1 (tag {tag})")]
    ZeroTokenBudget { tag: String },
    #[error("transport failure after {attempts} attempts (tag {tag}): {message}")]
    Transport {
        tag: String,
        attempts: u32,
        message: String,
    },
    #[error("endpoint returned malformed body (tag {tag}): {message}")]
    MalformedBody { tag: String, message: String },
    #[error("scripted backend has no matching rule for request tag {tag}")]
    NoMatchingRule { tag: String },
    #[error("cache I/O failure at {path}: {source}")]
    CacheIo {
        path: String,
        source: std::io::Error,
    },
    #[error("cache record at {path}:{line} is malformed: {message}")]
    CacheRecord {
        path: String,
        line: usize,
        message: String,
    },
}

/// A completion service. Implementations must be safe for concurrent
/// callers; the HTTP backend additionally enforces an in-flight limit.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError>;

    /// Stable identity string (model id / endpoint / script digest), used
    /// in cache keys and run manifests.
    fn identity(&self) -> String;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for &T {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
    fn identity(&self) -> String {
        (**self).identity()
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for Box<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
    fn identity(&self) -> String {
        (**self).identity()
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
    fn identity(&self) -> String {
        (**self).identity()
    }
}

#[derive(Debug, Error)]
pub enum ChooseError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("unmappable answer for {tag}: model said {raw:?} twice")]
    Unmappable { tag: String, raw: String },
    #[error("choose_option requires at least 2 options (tag {tag})")]
    TooFewOptions { tag: String },
}

/// Settings for constrained multiple-choice elicitation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ChooseConfig {
    /// Token budget for the emitted answer. Small by design: one option
    /// key is one or a few tokens.
    pub max_new_tokens: u32,
    pub temperature: f64,
    /// Appended to the prompt on the single retry after an unmappable
    /// first answer.
    pub retry_suffix: String,
}

impl Default for ChooseConfig {
    fn default() -> Self {
        Self {
            max_new_tokens: 8,
            temperature: 0.0,
            retry_suffix: "\nAnswer with the single letter of one option and nothing else: "
                .to_string(),
        }
    }
}

/// Renders options as lettered lines ("A. threat") for the `{options}`
/// template slot. Supports up to 26 options.
pub fn format_options(options: &[OptionLabel]) -> String {
    options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("{}. {}", letter(i), o.display))
        .collect::<Vec<_>>()
        .join("\n")
}

fn letter(index: usize) -> char {
    (b'A' + (index as u8)) as char
}

/// Maps emitted text to an option index: letter key or exact match first,
/// then normalized match, then unique prefix. Returns `None` when no
/// unique mapping exists.
pub fn map_answer(raw: &str, options: &[OptionLabel]) -> Option<usize> {
    let trimmed = raw.trim();
    // Letter key: a single letter, possibly wrapped in punctuation.
    let stripped: String = trimmed
        .chars()
        .filter(|c| c.is_alphanumeric())
        .collect();
    if stripped.len() == 1 {
        if let Some(c) = stripped.chars().next() {
            let upper = c.to_ascii_uppercase();
            if upper.is_ascii_uppercase() {
                let idx = (upper as u8 - b'A') as usize;
                if idx < options.len() {
                    return Some(idx);
                }
            }
        }
    }
    // Exact match on display or canonical.
    if let Some(idx) = options
        .iter()
        .position(|o| o.display == trimmed || o.canonical == trimmed)
    {
        return Some(idx);
    }
    // Normalized match, including aliases.
    let norm = normalize_bare(trimmed);
    if !norm.is_empty() {
        if let Some(idx) = options.iter().position(|o| {
            o.canonical == norm || o.aliases.iter().any(|a| normalize_bare(a) == norm)
        }) {
            return Some(idx);
        }
        // Unique prefix of exactly one canonical.
        let hits: Vec<usize> = options
            .iter()
            .enumerate()
            .filter(|(_, o)| o.canonical.starts_with(&norm))
            .map(|(i, _)| i)
            .collect();
        if hits.len() == 1 {
            return Some(hits[0]);
        }
    }
    None
}

/// Issues a few-token completion and maps it onto exactly one option.
/// On an unmappable first answer, retries once with an explicit
/// restatement suffix; a second unmappable answer is an error (the
/// caller records an abstention, never a guess).
pub fn choose_option(
    backend: &dyn CompletionBackend,
    prompt: &str,
    options: &[OptionLabel],
    tag: &str,
    cfg: &ChooseConfig,
) -> Result<(usize, String), ChooseError> {
    if options.len() < 2 {
        return Err(ChooseError::TooFewOptions {
            tag: tag.to_string(),
        });
    }
    let request = CompletionRequest::new(prompt, tag)
        .with_max_new_tokens(cfg.max_new_tokens)
        .with_temperature(cfg.temperature)
        .with_stop(vec!["\n".to_string()]);
    let first = backend.complete(&request)?;
    if let Some(idx) = map_answer(&first.text, options) {
        debug_assert!(idx < options.len());
        return Ok((idx, first.text));
    }
    let retry = CompletionRequest::new(
        format!("{}{}", prompt, cfg.retry_suffix),
        format!("{tag}/retry"),
    )
    .with_max_new_tokens(cfg.max_new_tokens)
    .with_temperature(cfg.temperature)
    .with_stop(vec!["\n".to_string()]);
    let second = backend.complete(&retry)?;
    match map_answer(&second.text, options) {
        Some(idx) => Ok((idx, second.text)),
        None => Err(ChooseError::Unmappable {
            tag: tag.to_string(),
            raw: second.text,
        }),
    }
}
