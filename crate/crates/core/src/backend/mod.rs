//! Chat-model backends behind one async interface.
//!
//! Three implementations exist: [`HttpBackend`] speaks the OpenAI-compatible
//! chat-completions protocol, [`ScriptedBackend`] answers deterministically
//! for tests and offline runs, and [`ReplayBackend`] memoizes another backend
//! in an append-only JSONL store keyed by [`cache_key`].

mod http;
mod replay;
mod scripted;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{HttpBackend, HttpOptions};
pub use replay::{ReplayBackend, ReplayRecord, ReplayStore};
pub use scripted::{FnBackend, ScriptMode, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// Decoding parameters for one request.
///
/// `seed` is forwarded to the endpoint and hashed into the cache key so that
/// repeated conversations with the same persona get distinct cache entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_temperature() -> f64 {
    0.7
}

fn default_max_tokens() -> u32 {
    256
}

impl ChatParams {
    pub fn new(model: impl Into<String>) -> ChatParams {
        ChatParams {
            model: model.into(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            stop: None,
            seed: None,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("server returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("API key environment variable {0} is not set")]
    AuthMissing(String),
    #[error("replay cache miss for key {key}")]
    ReplayMiss { key: String },
    #[error("scripted backend exhausted after {0} responses")]
    ScriptExhausted(usize),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("replay store I/O error: {0}")]
    Store(String),
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError>;
}

#[async_trait]
impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    async fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError> {
        (**self).chat(messages, params).await
    }
}

pub(crate) fn check_messages(messages: &[ChatMessage]) -> Result<(), BackendError> {
    if messages.is_empty() {
        return Err(BackendError::InvalidRequest("messages must not be empty".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
    stop: &'a Option<Vec<String>>,
    seed: Option<u64>,
}

/// Hex SHA-256 of the request content. Field order is fixed by the struct
/// layout, so the key is stable across runs and platforms.
pub fn cache_key(messages: &[ChatMessage], params: &ChatParams) -> String {
    let material = KeyMaterial {
        model: &params.model,
        messages,
        temperature: params.temperature,
        max_tokens: params.max_tokens,
        stop: &params.stop,
        seed: params.seed,
    };
    let bytes = serde_json::to_vec(&material).expect("key material serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Declarative backend description, as found in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Http {
        endpoint: String,
        #[serde(default = "default_api_key_env")]
        api_key_env: Option<String>,
        #[serde(default)]
        options: HttpOptions,
    },
    Scripted {
        responses: Vec<String>,
        #[serde(default)]
        mode: ScriptMode,
    },
    Replay {
        cache_path: PathBuf,
        #[serde(default)]
        strict: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inner: Option<Box<BackendSpec>>,
    },
}

fn default_api_key_env() -> Option<String> {
    Some("OPENAI_API_KEY".to_string())
}

impl BackendSpec {
    pub fn validate(&self) -> Result<(), BackendError> {
        match self {
            BackendSpec::Http { endpoint, .. } if endpoint.trim().is_empty() => {
                Err(BackendError::InvalidRequest("http backend requires an endpoint".into()))
            }
            BackendSpec::Scripted { responses, .. } if responses.is_empty() => Err(
                BackendError::InvalidRequest("scripted backend requires at least one response".into()),
            ),
            BackendSpec::Replay { cache_path, .. } if cache_path.as_os_str().is_empty() => {
                Err(BackendError::InvalidRequest("replay backend requires a cache path".into()))
            }
            BackendSpec::Replay { inner: Some(inner), .. } => inner.validate(),
            _ => Ok(()),
        }
    }

    /// Wraps this spec in a strict replay layer, or flips an existing replay
    /// layer to strict.
    pub fn into_strict(self, default_cache: &Path) -> BackendSpec {
        match self {
            BackendSpec::Replay { cache_path, inner, .. } => BackendSpec::Replay {
                cache_path,
                strict: true,
                inner,
            },
            other => BackendSpec::Replay {
                cache_path: default_cache.to_path_buf(),
                strict: true,
                inner: Some(Box::new(other)),
            },
        }
    }

    pub fn set_endpoint(&mut self, url: &str) {
        match self {
            BackendSpec::Http { endpoint, .. } => *endpoint = url.to_string(),
            BackendSpec::Replay { inner: Some(inner), .. } => inner.set_endpoint(url),
            _ => {}
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Http { endpoint, .. } => write!(f, "http({endpoint})"),
            BackendSpec::Scripted { responses, mode } => {
                write!(f, "scripted({mode:?}, {} responses)", responses.len())
            }
            BackendSpec::Replay { cache_path, strict, inner } => {
                write!(f, "replay({}, strict={strict}", cache_path.display())?;
                if let Some(inner) = inner {
                    write!(f, ", {inner}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Builds backends from specs. Replay layers that name the same cache file
/// share one store, so concurrent roles never race on the file.
#[derive(Default)]
pub struct BackendFactory {
    stores: HashMap<PathBuf, Arc<ReplayStore>>,
}

impl BackendFactory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn build(&mut self, spec: &BackendSpec) -> Result<Arc<dyn ChatBackend>, BackendError> {
        spec.validate()?;
        Ok(match spec {
            BackendSpec::Http { endpoint, api_key_env, options } => {
                let key = match api_key_env {
                    Some(var) => Some(
                        std::env::var(var).map_err(|_| BackendError::AuthMissing(var.clone()))?,
                    ),
                    None => None,
                };
                Arc::new(HttpBackend::new(endpoint, key, options.clone())?)
            }
            BackendSpec::Scripted { responses, mode } => {
                Arc::new(ScriptedBackend::new(responses.clone(), *mode))
            }
            BackendSpec::Replay { cache_path, strict, inner } => {
                let store = match self.stores.get(cache_path) {
                    Some(s) => s.clone(),
                    None => {
                        let s = Arc::new(ReplayStore::open(cache_path)?);
                        self.stores.insert(cache_path.clone(), s.clone());
                        s
                    }
                };
                let inner = inner.as_deref().map(|s| self.build(s)).transpose()?;
                Arc::new(ReplayBackend::new(store, inner, *strict))
            }
        })
    }
}
