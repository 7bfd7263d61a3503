use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{cache_key, check_messages, BackendError, ChatBackend, ChatMessage, ChatParams, Role};

/// How a [`ScriptedBackend`] picks its next response.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptMode {
    /// Pop responses in order; error when exhausted.
    Queue,
    /// Round-robin over the responses.
    Cycle,
    /// Pick by conversation position: the n-th user message selects the
    /// n-th response, clamped to the last.
    ByTurn,
    /// Pick by request hash. Deterministic under any interleaving.
    #[default]
    Sampled,
}

/// Deterministic backend for tests and offline runs.
pub struct ScriptedBackend {
    responses: Vec<String>,
    queue: Mutex<VecDeque<String>>,
    mode: ScriptMode,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(responses: Vec<String>, mode: ScriptMode) -> Self {
        ScriptedBackend {
            queue: Mutex::new(responses.iter().cloned().collect()),
            responses,
            mode,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn queue<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(responses.into_iter().map(Into::into).collect(), ScriptMode::Queue)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    async fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError> {
        check_messages(messages)?;
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if self.responses.is_empty() {
            return Err(BackendError::ScriptExhausted(0));
        }
        let idx = match self.mode {
            ScriptMode::Queue => {
                return self
                    .queue
                    .lock()
                    .unwrap()
                    .pop_front()
                    .ok_or(BackendError::ScriptExhausted(self.responses.len()));
            }
            ScriptMode::Cycle => n % self.responses.len(),
            ScriptMode::ByTurn => {
                let users = messages.iter().filter(|m| m.role == Role::User).count();
                users.saturating_sub(1).min(self.responses.len() - 1)
            }
            ScriptMode::Sampled => {
                let key = cache_key(messages, params);
                let head = u64::from_str_radix(&key[..16], 16).expect("hex key");
                (head % self.responses.len() as u64) as usize
            }
        };
        Ok(self.responses[idx].clone())
    }
}

type Responder = dyn Fn(&[ChatMessage], &ChatParams) -> Result<String, BackendError> + Send + Sync;

/// Backend computed by a closure over the request.
pub struct FnBackend {
    f: Box<Responder>,
    calls: AtomicUsize,
}

impl FnBackend {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&[ChatMessage], &ChatParams) -> Result<String, BackendError> + Send + Sync + 'static,
    {
        FnBackend { f: Box::new(f), calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl ChatBackend for FnBackend {
    async fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError> {
        check_messages(messages)?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.f)(messages, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ChatParams {
        ChatParams::new("scripted")
    }

    #[tokio::test]
    async fn queue_passthrough_and_exhaustion() {
        let b = ScriptedBackend::queue(["hi"]);
        let m = [ChatMessage::user("x")];
        assert_eq!(b.chat(&m, &p()).await.unwrap(), "hi");
        assert_eq!(b.chat(&m, &p()).await, Err(BackendError::ScriptExhausted(1)));
        assert_eq!(b.calls(), 2);
    }

    #[tokio::test]
    async fn empty_messages_rejected() {
        let b = ScriptedBackend::queue(["hi"]);
        assert!(matches!(b.chat(&[], &p()).await, Err(BackendError::InvalidRequest(_))));
    }

    #[tokio::test]
    async fn by_turn_follows_user_message_count() {
        let b = ScriptedBackend::new(vec!["a".into(), "b".into()], ScriptMode::ByTurn);
        let one = [ChatMessage::system("s"), ChatMessage::user("1")];
        let three = [
            ChatMessage::user("1"),
            ChatMessage::assistant("r"),
            ChatMessage::user("2"),
            ChatMessage::assistant("r"),
            ChatMessage::user("3"),
        ];
        assert_eq!(b.chat(&one, &p()).await.unwrap(), "a");
        assert_eq!(b.chat(&three, &p()).await.unwrap(), "b");
    }

    #[tokio::test]
    async fn sampled_is_a_function_of_the_request() {
        let b = ScriptedBackend::new((0..10).map(|i| i.to_string()).collect(), ScriptMode::Sampled);
        let m = [ChatMessage::user("x")];
        let first = b.chat(&m, &p().with_seed(3)).await.unwrap();
        for _ in 0..5 {
            assert_eq!(b.chat(&m, &p().with_seed(3)).await.unwrap(), first);
        }
        let distinct: std::collections::HashSet<_> = futures::future::join_all(
            (0..50).map(|s| {
                let params = p().with_seed(s);
                let b = &b;
                let m = &m;
                async move { b.chat(m, &params).await.unwrap() }
            }),
        )
        .await
        .into_iter()
        .collect();
        assert!(distinct.len() > 3);
    }
}
