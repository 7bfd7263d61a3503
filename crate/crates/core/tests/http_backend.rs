use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use salesim::backend::{
    BackendError, ChatBackend, ChatMessage, ChatParams, HttpBackend, HttpOptions, ReplayBackend, ReplayStore,
};

#[derive(Default)]
struct Mock {
    // (status, body) per call; the last entry repeats
    script: Mutex<VecDeque<(u16, String)>>,
    seen: Mutex<Vec<(Option<String>, Value)>>,
}

fn ok_body(content: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

async fn handler(State(mock): State<Arc<Mock>>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, String) {
    let auth = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    mock.seen.lock().unwrap().push((auth, body));
    let mut script = mock.script.lock().unwrap();
    let (status, body) = if script.len() > 1 {
        script.pop_front().unwrap()
    } else {
        script.front().cloned().unwrap()
    };
    (StatusCode::from_u16(status).unwrap(), body)
}

async fn serve(script: Vec<(u16, String)>) -> (String, Arc<Mock>) {
    let mock = Arc::new(Mock { script: Mutex::new(script.into()), ..Default::default() });
    let app = Router::new()
        .route("/v1/chat/completions", post(handler))
        .with_state(mock.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    (format!("http://{addr}"), mock)
}

fn fast() -> HttpOptions {
    HttpOptions { timeout_secs: 5, max_attempts: 3, base_delay_ms: 1, max_delay_ms: 5, max_in_flight: 4 }
}

fn msgs() -> Vec<ChatMessage> {
    vec![ChatMessage::system("be brief"), ChatMessage::user("hello")]
}

#[tokio::test]
async fn server_error_is_retried_then_succeeds() {
    let (url, mock) = serve(vec![(500, "boom".into()), (200, ok_body("hi there"))]).await;
    let b = HttpBackend::new(&url, None, fast()).unwrap();
    let out = b.chat(&msgs(), &ChatParams::new("m")).await.unwrap();
    assert_eq!(out, "hi there");
    assert_eq!(b.attempts(), 2);
    assert_eq!(mock.seen.lock().unwrap().len(), 2);
}

#[tokio::test]
async fn client_error_is_not_retried() {
    let (url, mock) = serve(vec![(400, "bad request".into())]).await;
    let b = HttpBackend::new(&url, None, fast()).unwrap();
    let err = b.chat(&msgs(), &ChatParams::new("m")).await.unwrap_err();
    assert!(matches!(err, BackendError::Status { status: 400, .. }), "{err:?}");
    assert_eq!(b.attempts(), 1);
    assert_eq!(mock.seen.lock().unwrap().len(), 1);
}

#[tokio::test]
async fn rate_limit_exhausts_attempts() {
    let (url, _mock) = serve(vec![(429, "slow down".into())]).await;
    let b = HttpBackend::new(&url, None, fast()).unwrap();
    let err = b.chat(&msgs(), &ChatParams::new("m")).await.unwrap_err();
    assert!(matches!(err, BackendError::RateLimited { attempts: 3 }), "{err:?}");
    assert_eq!(b.attempts(), 3);
}

#[tokio::test]
async fn malformed_success_is_fatal() {
    let (url, _mock) = serve(vec![(200, r#"{"choices": []}"#.into())]).await;
    let b = HttpBackend::new(&url, None, fast()).unwrap();
    let err = b.chat(&msgs(), &ChatParams::new("m")).await.unwrap_err();
    assert!(matches!(err, BackendError::MalformedResponse(_)), "{err:?}");
    assert_eq!(b.attempts(), 1);
}

#[tokio::test]
async fn request_carries_auth_and_protocol_fields() {
    let (url, mock) = serve(vec![(200, ok_body("ok"))]).await;
    // a trailing /v1 is tolerated
    let b = HttpBackend::new(&format!("{url}/v1/"), Some("sk-test".into()), fast()).unwrap();
    assert_eq!(b.url(), format!("{url}/v1/chat/completions"));
    let params = ChatParams::new("gpt-x").with_temperature(0.3).with_seed(17);
    b.chat(&msgs(), &params).await.unwrap();
    let seen = mock.seen.lock().unwrap();
    let (auth, body) = &seen[0];
    assert_eq!(auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(body["model"], "gpt-x");
    assert_eq!(body["temperature"], 0.3);
    assert_eq!(body["seed"], 17);
    assert_eq!(body["max_tokens"], 256);
    assert_eq!(body["messages"][0], json!({"role": "system", "content": "be brief"}));
    assert_eq!(body["messages"][1], json!({"role": "user", "content": "hello"}));
}

#[tokio::test]
async fn replay_cache_makes_rerun_endpoint_free() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("replay.jsonl");
    let (url, mock) = serve(vec![(200, ok_body("first")), (200, ok_body("second"))]).await;
    let params = ChatParams::new("m").with_seed(1);

    let http: Arc<dyn ChatBackend> = Arc::new(HttpBackend::new(&url, None, fast()).unwrap());
    let store = Arc::new(ReplayStore::open(&cache).unwrap());
    let cold = ReplayBackend::new(store, Some(http), false);
    assert_eq!(cold.chat(&msgs(), &params).await.unwrap(), "first");
    assert_eq!(cold.chat(&msgs(), &params).await.unwrap(), "first");
    assert_eq!(mock.seen.lock().unwrap().len(), 1);

    // fresh process view of the same file, no inner backend at all
    let store = Arc::new(ReplayStore::open(&cache).unwrap());
    let warm = ReplayBackend::new(store, None, true);
    assert_eq!(warm.chat(&msgs(), &params).await.unwrap(), "first");
    let miss = warm.chat(&msgs(), &ChatParams::new("m").with_seed(2)).await.unwrap_err();
    assert!(matches!(miss, BackendError::ReplayMiss { .. }));
    assert_eq!(mock.seen.lock().unwrap().len(), 1);
}
