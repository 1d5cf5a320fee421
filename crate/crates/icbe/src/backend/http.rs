//! Blocking HTTP client for completion-style endpoints.
//!
//! Posts `{prompt, max_tokens, temperature, stop}` to a configurable
//! URL, reads the bearer token from an environment variable, retries
//! transient failures with exponential backoff, and caps the number of
//! in-flight requests.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BackendError, CompletionBackend, CompletionRequest, CompletionResponse, FinishReason};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    /// Optional model name forwarded in the request body.
    #[serde(default)]
    pub model: Option<String>,
    /// Environment variable holding the bearer token. Unset or empty
    /// means no Authorization header.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Maximum concurrent in-flight requests.
    #[serde(default = "default_in_flight")]
    pub in_flight: usize,
}

fn default_timeout_s() -> u64 {
    120
}
fn default_retries() -> u32 {
    3
}
fn default_in_flight() -> usize {
    4
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8080/v1/completions".to_string(),
            model: None,
            token_env: None,
            timeout_s: default_timeout_s(),
            max_retries: default_retries(),
            in_flight: default_in_flight(),
        }
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
    slots: Mutex<usize>,
    available: Condvar,
}

struct SlotGuard<'a> {
    backend: &'a HttpBackend,
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let mut slots = self.backend.slots.lock().unwrap();
        *slots += 1;
        self.backend.available.notify_one();
    }
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .expect("HTTP client builds");
        let slots = Mutex::new(config.in_flight.max(1));
        Self {
            config,
            client,
            slots,
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut slots = self.slots.lock().unwrap();
        while *slots == 0 {
            slots = self.available.wait(slots).unwrap();
        }
        *slots -= 1;
        SlotGuard { backend: self }
    }

    fn bearer_token(&self) -> Option<String> {
        let var = self.config.token_env.as_deref()?;
        match std::env::var(var) {
            Ok(v) if !v.is_empty() => Some(v),
            _ => None,
        }
    }

    fn post_once(&self, request: &CompletionRequest) -> Result<CompletionResponse, String> {
        let mut body = serde_json::json!({
            "prompt": request.prompt,
            "max_tokens": request.max_new_tokens,
            "temperature": request.temperature,
            "stop": request.stop_sequences,
        });
        if let Some(model) = &self.config.model {
            body["model"] = Value::String(model.clone());
        }
        let mut builder = self.client.post(&self.config.endpoint).json(&body);
        if let Some(token) = self.bearer_token() {
            builder = builder.bearer_auth(token);
        }
        let started = Instant::now();
        let response = builder.send().map_err(|e| e.to_string())?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(format!("status {status}"));
        }
        let latency_ms = started.elapsed().as_millis() as u64;
        let text_body = response.text().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("status {status}: {text_body}"));
        }
        Ok(parse_completion_body(&text_body, latency_ms)?)
    }
}

/// Accepts the common completion body shapes: a bare `text` field, an
/// OpenAI-style `choices[0].text` or `choices[0].message.content`, or a
/// bare `content` field.
fn parse_completion_body(body: &str, latency_ms: u64) -> Result<CompletionResponse, String> {
    let value: Value = serde_json::from_str(body).map_err(|e| format!("not JSON: {e}"))?;
    let (text, finish) = if let Some(t) = value.get("text").and_then(Value::as_str) {
        (t.to_string(), value.get("finish_reason"))
    } else if let Some(choice) = value
        .get("choices")
        .and_then(Value::as_array)
        .and_then(|c| c.first())
    {
        let text = choice
            .get("text")
            .and_then(Value::as_str)
            .map(str::to_string)
            .or_else(|| {
                choice
                    .get("message")
                    .and_then(|m| m.get("content"))
                    .and_then(Value::as_str)
                    .map(str::to_string)
            })
            .ok_or_else(|| "choices[0] has neither text nor message.content".to_string())?;
        (text, choice.get("finish_reason"))
    } else if let Some(t) = value.get("content").and_then(Value::as_str) {
        (t.to_string(), value.get("finish_reason"))
    } else {
        return Err("no text/choices/content field".to_string());
    };
    let finish_reason = match finish.and_then(Value::as_str) {
        Some("length") => FinishReason::Length,
        Some("error") => FinishReason::Error,
        _ => FinishReason::Stop,
    };
    Ok(CompletionResponse {
        text,
        finish_reason,
        latency_ms,
        cached: false,
    })
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        request.validate()?;
        let _slot = self.acquire();
        let mut last_error = String::new();
        let attempts = self.config.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = Duration::from_millis(250 * (1 << (attempt - 1).min(6)));
                std::thread::sleep(backoff);
            }
            match self.post_once(request) {
                Ok(response) => return Ok(response),
                Err(message) => last_error = message,
            }
        }
        // Malformed-body failures are not transient, but distinguishing
        // them from transport errors after exhausting retries matters
        // only for the error message.
        if last_error.starts_with("not JSON") || last_error.starts_with("no text") {
            Err(BackendError::MalformedBody {
                tag: request.tag.clone(),
                message: last_error,
            })
        } else {
            Err(BackendError::Transport {
                tag: request.tag.clone(),
                attempts,
                message: last_error,
            })
        }
    }

    fn identity(&self) -> String {
        match &self.config.model {
            Some(model) => format!("http:{}#{}", self.config.endpoint, model),
            None => format!("http:{}", self.config.endpoint),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bare_text_body() {
        let r = parse_completion_body(r#"{"text":" B","finish_reason":"stop"}"#, 5).unwrap();
        assert_eq!(r.text, " B");
        assert_eq!(r.finish_reason, FinishReason::Stop);
    }

    #[test]
    fn parses_openai_style_body() {
        let body = r#"{"choices":[{"text":"2","finish_reason":"length"}]}"#;
        let r = parse_completion_body(body, 5).unwrap();
        assert_eq!(r.text, "2");
        assert_eq!(r.finish_reason, FinishReason::Length);
    }

    #[test]
    fn rejects_bodies_without_text() {
        assert!(parse_completion_body(r#"{"ok":true}"#, 0).is_err());
        assert!(parse_completion_body("not json", 0).is_err());
    }
}
