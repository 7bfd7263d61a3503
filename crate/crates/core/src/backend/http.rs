use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;
use tracing::{debug, warn};

use super::{check_messages, BackendError, ChatBackend, ChatMessage, ChatParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpOptions {
    pub timeout_secs: u64,
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    pub max_in_flight: usize,
}

impl Default for HttpOptions {
    fn default() -> Self {
        HttpOptions {
            timeout_secs: 60,
            max_attempts: 5,
            base_delay_ms: 500,
            max_delay_ms: 30_000,
            max_in_flight: 8,
        }
    }
}

impl HttpOptions {
    fn delay(&self, retry: u32) -> Duration {
        let ms = self
            .base_delay_ms
            .saturating_mul(1u64 << retry.min(20))
            .min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

/// Client for `POST <endpoint>/v1/chat/completions`.
pub struct HttpBackend {
    client: reqwest::Client,
    url: String,
    api_key: Option<String>,
    options: HttpOptions,
    permits: Semaphore,
    attempts: AtomicU64,
}

enum Failure {
    Retryable(BackendError),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(endpoint: &str, api_key: Option<String>, options: HttpOptions) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(options.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let base = endpoint.trim_end_matches('/');
        let base = base.strip_suffix("/v1").unwrap_or(base);
        Ok(HttpBackend {
            client,
            url: format!("{base}/v1/chat/completions"),
            api_key,
            permits: Semaphore::new(options.max_in_flight.max(1)),
            options,
            attempts: AtomicU64::new(0),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// HTTP attempts made so far, retries included.
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::SeqCst)
    }

    async fn attempt(&self, body: &Value) -> Result<String, Failure> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| {
            let err = BackendError::Transport(e.to_string());
            if e.is_timeout() || e.is_connect() || e.is_request() {
                Failure::Retryable(err)
            } else {
                Failure::Fatal(err)
            }
        })?;
        let status = resp.status();
        let text = resp
            .text()
            .await
            .map_err(|e| Failure::Retryable(BackendError::Transport(e.to_string())))?;
        if status.as_u16() == 429 {
            return Err(Failure::Retryable(BackendError::RateLimited { attempts: 0 }));
        }
        if status.is_server_error() {
            return Err(Failure::Retryable(BackendError::Status { status: status.as_u16(), body: text }));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(BackendError::Status { status: status.as_u16(), body: text }));
        }
        extract_content(&text).map_err(Failure::Fatal)
    }
}

fn extract_content(body: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| BackendError::MalformedResponse(format!("invalid JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedResponse("missing choices[0].message.content".into()))
}

pub(crate) fn request_body(messages: &[ChatMessage], params: &ChatParams) -> Value {
    let mut body = json!({
        "model": params.model,
        "messages": messages,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
    });
    if let Some(stop) = &params.stop {
        body["stop"] = json!(stop);
    }
    if let Some(seed) = params.seed {
        body["seed"] = json!(seed);
    }
    body
}

#[async_trait]
impl ChatBackend for HttpBackend {
    async fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError> {
        check_messages(messages)?;
        params.validate()?;
        let body = request_body(messages, params);
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        let max = self.options.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.attempt(&body).await {
                Ok(text) => {
                    debug!(attempt, model = %params.model, "chat completed");
                    return Ok(text);
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(e)) if attempt >= max => {
                    return Err(match e {
                        BackendError::RateLimited { .. } => BackendError::RateLimited { attempts: attempt },
                        other => other,
                    });
                }
                Err(Failure::Retryable(e)) => {
                    let wait = self.options.delay(attempt - 1);
                    warn!(attempt, error = %e, wait_ms = wait.as_millis() as u64, "retrying chat request");
                    tokio::time::sleep(wait).await;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_has_protocol_fields() {
        let body = request_body(&[ChatMessage::user("hi")], &ChatParams::new("m"));
        assert_eq!(
            body,
            json!({"model":"m","messages":[{"role":"user","content":"hi"}],"temperature":0.7,"max_tokens":256})
        );
        let body = request_body(&[ChatMessage::user("hi")], &ChatParams::new("m").with_seed(9));
        assert_eq!(body["seed"], json!(9));
    }

    #[test]
    fn content_extraction() {
        assert_eq!(
            extract_content(r#"{"choices":[{"message":{"content":"ok"}}]}"#).unwrap(),
            "ok"
        );
        assert!(matches!(extract_content("{}"), Err(BackendError::MalformedResponse(_))));
        assert!(matches!(extract_content("nope"), Err(BackendError::MalformedResponse(_))));
    }

    #[test]
    fn backoff_is_exponential_and_capped() {
        let o = HttpOptions { base_delay_ms: 100, max_delay_ms: 1000, ..Default::default() };
        assert_eq!(o.delay(0), Duration::from_millis(100));
        assert_eq!(o.delay(2), Duration::from_millis(400));
        assert_eq!(o.delay(10), Duration::from_millis(1000));
    }

    #[test]
    fn endpoint_normalization() {
        let b = HttpBackend::new("http://x:1/v1/", None, HttpOptions::default()).unwrap();
        assert_eq!(b.url(), "http://x:1/v1/chat/completions");
        let b = HttpBackend::new("http://x:1", None, HttpOptions::default()).unwrap();
        assert_eq!(b.url(), "http://x:1/v1/chat/completions");
    }
}
