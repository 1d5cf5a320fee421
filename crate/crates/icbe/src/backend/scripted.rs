//! Deterministic scripted test double for the completion service.
//!
//! Rules are ordered pattern/response pairs; the first matching rule
//! wins, and a rule whose use budget is exhausted never matches again.
//! A request no rule matches is a loud error, never a fabricated answer.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, CompletionBackend, CompletionRequest, CompletionResponse, FinishReason};

/// One substring-match rule: if `pattern` occurs in the prompt, respond
/// with `response`. `max_uses` caps how many times the rule may fire.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptedRule {
    pub pattern: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_uses: Option<u32>,
}

impl ScriptedRule {
    pub fn new(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            pattern: pattern.into(),
            response: response.into(),
            max_uses: None,
        }
    }

    pub fn once(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            pattern: pattern.into(),
            response: response.into(),
            max_uses: Some(1),
        }
    }
}

pub struct ScriptedBackend {
    rules: Vec<ScriptedRule>,
    uses: Mutex<Vec<u32>>,
    calls: AtomicU64,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptedRule>) -> Self {
        let uses = Mutex::new(vec![0; rules.len()]);
        Self {
            rules,
            uses,
            calls: AtomicU64::new(0),
        }
    }

    /// Loads a JSON array of rules.
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|source| BackendError::CacheIo {
            path: path.display().to_string(),
            source,
        })?;
        let rules: Vec<ScriptedRule> =
            serde_json::from_str(&text).map_err(|e| BackendError::MalformedBody {
                tag: path.display().to_string(),
                message: e.to_string(),
            })?;
        Ok(Self::new(rules))
    }

    /// Total completions served.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// How many times each rule has fired, in rule order.
    pub fn rule_uses(&self) -> Vec<u32> {
        self.uses.lock().unwrap().clone()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut uses = self.uses.lock().unwrap();
        for (i, rule) in self.rules.iter().enumerate() {
            if let Some(cap) = rule.max_uses {
                if uses[i] >= cap {
                    continue;
                }
            }
            if request.prompt.contains(&rule.pattern) {
                uses[i] += 1;
                return Ok(CompletionResponse {
                    text: rule.response.clone(),
                    finish_reason: FinishReason::Stop,
                    latency_ms: 0,
                    cached: false,
                });
            }
        }
        Err(BackendError::NoMatchingRule {
            tag: request.tag.clone(),
        })
    }

    fn identity(&self) -> String {
        let mut hasher = Sha256::new();
        for rule in &self.rules {
            hasher.update(rule.pattern.as_bytes());
            hasher.update([0]);
            hasher.update(rule.response.as_bytes());
            hasher.update([0]);
        }
        format!("scripted:{}", hex::encode(&hasher.finalize()[..8]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_match_wins() {
        let backend = ScriptedBackend::new(vec![
            ScriptedRule::new("number is", "2"),
            ScriptedRule::new("number", "9"),
        ]);
        let req = CompletionRequest::new("That number is ", "t");
        assert_eq!(backend.complete(&req).unwrap().text, "2");
    }

    #[test]
    fn exhausted_rule_never_matches() {
        let backend = ScriptedBackend::new(vec![
            ScriptedRule::once("number", "first"),
            ScriptedRule::new("number", "second"),
        ]);
        let req = CompletionRequest::new("the number", "t");
        assert_eq!(backend.complete(&req).unwrap().text, "first");
        assert_eq!(backend.complete(&req).unwrap().text, "second");
    }

    #[test]
    fn no_matching_rule_names_the_tag() {
        let backend = ScriptedBackend::new(vec![]);
        let req = CompletionRequest::new("anything", "elicit/forces");
        match backend.complete(&req) {
            Err(BackendError::NoMatchingRule { tag }) => assert_eq!(tag, "elicit/forces"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
