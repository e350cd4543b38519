//! Deterministic OpenAI-compatible streaming backend used as ground truth
//! for timing and scheduling measurements.
//!
//! Timeline of a mock process: it binds its port only after `init_delay_s`,
//! and `/health` (and `/v1/models`) answer 200 only once a further
//! `load_delay_s` has passed. Each admitted stream emits its first content
//! chunk `ttft_s` after admission, then one chunk every `per_token_delay_s`.
//! The last decode step (`per_token_delay_s` after the final content chunk)
//! produces the finish chunk, the optional usage chunk and `[DONE]`, so a
//! response of N tokens spends exactly `N * per_token_delay_s` between first
//! token and terminator.
//!
//! At most `capacity` streams progress concurrently; excess requests either
//! wait in FIFO order or are refused with 503, per `queue_policy`.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bytes::Bytes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::sync::{mpsc, oneshot, Semaphore};

use crate::backend::sse::{data_frame, DONE_FRAME};

pub const MOCK_TOKEN: &str = "tok ";

#[derive(Debug, Error)]
pub enum MockError {
    #[error("profile: {0}")]
    Profile(String),
    #[error("canned responses {path}: {message}")]
    Canned { path: PathBuf, message: String },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QueuePolicy {
    #[default]
    FifoQueue,
    #[serde(rename = "reject_503")]
    Reject503,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MockProfile {
    pub init_delay_s: f64,
    pub load_delay_s: f64,
    pub ttft_s: f64,
    pub per_token_delay_s: f64,
    pub tokens_per_response: u64,
    pub capacity: usize,
    pub queue_policy: QueuePolicy,
    pub jitter_s: f64,
    pub emit_usage: bool,
    pub canned_responses: Option<PathBuf>,
    pub seed: u64,
}

impl Default for MockProfile {
    fn default() -> Self {
        MockProfile {
            init_delay_s: 0.0,
            load_delay_s: 0.0,
            ttft_s: 0.05,
            per_token_delay_s: 0.01,
            tokens_per_response: 16,
            capacity: 64,
            queue_policy: QueuePolicy::FifoQueue,
            jitter_s: 0.0,
            emit_usage: true,
            canned_responses: None,
            seed: 0,
        }
    }
}

impl MockProfile {
    pub fn from_yaml(text: &str) -> Result<Self, MockError> {
        let profile: MockProfile =
            serde_yaml::from_str(text).map_err(|e| MockError::Profile(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self, MockError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MockError::Profile(format!("{}: {e}", path.display())))?;
        let mut profile = Self::from_yaml(&text)?;
        // Relative canned-response paths are resolved against the profile.
        if let (Some(canned), Some(dir)) = (&profile.canned_responses, path.parent()) {
            if canned.is_relative() {
                profile.canned_responses = Some(dir.join(canned));
            }
        }
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), MockError> {
        let delays = [
            ("init_delay_s", self.init_delay_s),
            ("load_delay_s", self.load_delay_s),
            ("ttft_s", self.ttft_s),
            ("per_token_delay_s", self.per_token_delay_s),
            ("jitter_s", self.jitter_s),
        ];
        for (name, v) in delays {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(MockError::Profile(format!("{name} must be >= 0")));
            }
        }
        if self.capacity < 1 {
            return Err(MockError::Profile("capacity must be >= 1".to_string()));
        }
        Ok(())
    }

    /// Stream duration seen by a client for an `n`-token response with no
    /// queueing and zero jitter.
    pub fn service_time_s(&self, n: u64) -> f64 {
        self.ttft_s + n as f64 * self.per_token_delay_s
    }
}

#[derive(Debug, Clone, Deserialize)]
struct CannedRecord {
    prompt_substring: String,
    response: String,
}

pub fn load_canned(path: &Path) -> Result<Vec<(String, String)>, MockError> {
    let err = |message: String| MockError::Canned {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<CannedRecord>(l)
                .map(|r| (r.prompt_substring, r.response))
                .map_err(|e| err(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Debug, Default)]
struct Counters {
    in_flight: AtomicU64,
    max_in_flight: AtomicU64,
    total_requests: AtomicU64,
    rejected: AtomicU64,
    completed: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockStats {
    pub max_in_flight: u64,
    pub total_requests: u64,
    pub rejected: u64,
    pub in_flight: u64,
    pub completed: u64,
}

impl Counters {
    fn snapshot(&self) -> MockStats {
        MockStats {
            max_in_flight: self.max_in_flight.load(Ordering::SeqCst),
            total_requests: self.total_requests.load(Ordering::SeqCst),
            rejected: self.rejected.load(Ordering::SeqCst),
            in_flight: self.in_flight.load(Ordering::SeqCst),
            completed: self.completed.load(Ordering::SeqCst),
        }
    }
}

struct AppState {
    profile: MockProfile,
    canned: Vec<(String, String)>,
    ready_at: Instant,
    gate: Arc<Semaphore>,
    counters: Counters,
    request_index: AtomicU64,
}

impl AppState {
    fn ready(&self) -> bool {
        Instant::now() >= self.ready_at
    }
}

/// A running mock backend.
pub struct MockServer {
    addr: SocketAddr,
    state: Arc<AppState>,
    shutdown: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<()>,
}

impl MockServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stats(&self) -> MockStats {
        self.state.counters.snapshot()
    }

    /// Stops accepting connections and aborts streams still in progress.
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if tokio::time::timeout(Duration::from_secs(2), &mut self.task).await.is_err() {
            self.task.abort();
        }
    }

    /// Waits until the server task ends (after a shutdown signal).
    pub async fn wait(mut self) {
        let _ = (&mut self.task).await;
    }

    pub fn shutdown_handle(&mut self) -> Option<oneshot::Sender<()>> {
        self.shutdown.take()
    }
}

/// Starts the mock on `addr`. The call itself sleeps for `init_delay_s`
/// before binding, so nothing accepts connections during initialization.
pub async fn serve(profile: MockProfile, addr: SocketAddr) -> Result<MockServer, MockError> {
    profile.validate()?;
    let canned = match &profile.canned_responses {
        Some(path) => load_canned(path)?,
        None => Vec::new(),
    };
    tokio::time::sleep(Duration::from_secs_f64(profile.init_delay_s)).await;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| MockError::Bind { addr, source })?;
    let addr = listener.local_addr().map_err(|source| MockError::Bind { addr, source })?;
    let state = Arc::new(AppState {
        ready_at: Instant::now() + Duration::from_secs_f64(profile.load_delay_s),
        gate: Arc::new(Semaphore::new(profile.capacity)),
        canned,
        profile,
        counters: Counters::default(),
        request_index: AtomicU64::new(0),
    });
    let app = Router::new()
        .route("/health", get(health))
        .route("/v1/models", get(models))
        .route("/v1/chat/completions", post(chat))
        .route("/__stats", get(stats))
        .with_state(state.clone());
    let (tx, rx) = oneshot::channel::<()>();
    use axum::serve::ListenerExt;
    let listener = listener.tap_io(|tcp| {
        let _ = tcp.set_nodelay(true);
    });
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
    });
    Ok(MockServer {
        addr,
        state,
        shutdown: Some(tx),
        task,
    })
}

fn loading() -> Response {
    (
        StatusCode::SERVICE_UNAVAILABLE,
        Json(json!({"status": "loading"})),
    )
        .into_response()
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    if state.ready() {
        Json(json!({"status": "ok"})).into_response()
    } else {
        loading()
    }
}

async fn models(State(state): State<Arc<AppState>>) -> Response {
    if state.ready() {
        Json(json!({"object": "list", "data": [{"id": "mock", "object": "model", "owned_by": "mock"}]}))
            .into_response()
    } else {
        loading()
    }
}

async fn stats(State(state): State<Arc<AppState>>) -> Json<MockStats> {
    Json(state.counters.snapshot())
}

fn chunk_json(id: &str, model: &str, delta: serde_json::Value, finish: Option<&str>) -> String {
    json!({
        "id": id,
        "object": "chat.completion.chunk",
        "created": 0,
        "model": model,
        "choices": [{"index": 0, "delta": delta, "finish_reason": finish}],
    })
    .to_string()
}

/// Content pieces for one response: canned text split on whitespace
/// boundaries (concatenation reproduces it), else `n` copies of the token
/// word.
fn response_pieces(state: &AppState, prompt: &str, max_tokens: Option<u64>) -> Vec<String> {
    let canned = state
        .canned
        .iter()
        .find(|(needle, _)| prompt.contains(needle.as_str()))
        .map(|(_, resp)| resp.split_inclusive(char::is_whitespace).map(str::to_string).collect::<Vec<_>>());
    let mut pieces = canned.unwrap_or_else(|| {
        vec![MOCK_TOKEN.to_string(); state.profile.tokens_per_response as usize]
    });
    if let Some(cap) = max_tokens {
        pieces.truncate(cap as usize);
    }
    pieces
}

fn error_response(status: StatusCode, kind: &str, message: &str) -> Response {
    (
        status,
        Json(json!({"error": {"type": kind, "message": message, "code": status.as_u16()}})),
    )
        .into_response()
}

async fn chat(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    if !state.ready() {
        return error_response(StatusCode::SERVICE_UNAVAILABLE, "model_loading", "model is still loading");
    }
    state.counters.total_requests.fetch_add(1, Ordering::SeqCst);
    let request: serde_json::Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, "invalid_request", &e.to_string()),
    };
    let prompt = request
        .get("messages")
        .and_then(|m| m.as_array())
        .and_then(|m| m.iter().rev().find_map(|msg| msg.get("content").and_then(|c| c.as_str())))
        .unwrap_or("")
        .to_string();
    let model = request
        .get("model")
        .and_then(|m| m.as_str())
        .unwrap_or("mock")
        .to_string();
    let max_tokens = request.get("max_tokens").and_then(|m| m.as_u64());

    let permit = match state.profile.queue_policy {
        QueuePolicy::Reject503 => match state.gate.clone().try_acquire_owned() {
            Ok(p) => Some(p),
            Err(_) => {
                state.counters.rejected.fetch_add(1, Ordering::SeqCst);
                return error_response(
                    StatusCode::SERVICE_UNAVAILABLE,
                    "capacity_exceeded",
                    "all stream slots are busy",
                );
            }
        },
        QueuePolicy::FifoQueue => None,
    };

    let index = state.request_index.fetch_add(1, Ordering::SeqCst);
    let pieces = response_pieces(&state, &prompt, max_tokens);
    let prompt_tokens = prompt.split_whitespace().count() as u64;
    let (tx, rx) = mpsc::channel::<Bytes>(16);
    let gen_state = state.clone();
    tokio::spawn(async move {
        let _permit = match permit {
            Some(p) => p,
            None => match gen_state.gate.clone().acquire_owned().await {
                Ok(p) => p,
                Err(_) => return,
            },
        };
        let counters = &gen_state.counters;
        let now = counters.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        counters.max_in_flight.fetch_max(now, Ordering::SeqCst);
        generate(&gen_state.profile, index, &model, &pieces, prompt_tokens, &tx).await;
        counters.in_flight.fetch_sub(1, Ordering::SeqCst);
        counters.completed.fetch_add(1, Ordering::SeqCst);
    });

    let stream = futures::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|b| (Ok::<_, std::convert::Infallible>(b), rx))
    });
    Response::builder()
        .status(StatusCode::OK)
        .header(header::CONTENT_TYPE, "text/event-stream")
        .header(header::CACHE_CONTROL, "no-cache")
        .body(Body::from_stream(stream))
        .expect("response")
}

async fn generate(
    profile: &MockProfile,
    index: u64,
    model: &str,
    pieces: &[String],
    prompt_tokens: u64,
    tx: &mpsc::Sender<Bytes>,
) {
    let id = format!("mock-{index}");
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    rng.set_stream(index);
    let mut jitter = |base: f64| -> Duration {
        let j = if profile.jitter_s > 0.0 {
            rng.random_range(-profile.jitter_s..=profile.jitter_s)
        } else {
            0.0
        };
        Duration::from_secs_f64((base + j).max(0.0))
    };
    let mut at = tokio::time::Instant::now() + jitter(profile.ttft_s);
    for piece in pieces {
        tokio::time::sleep_until(at).await;
        let frame = data_frame(&chunk_json(&id, model, json!({"content": piece}), None));
        if tx.send(Bytes::from(frame)).await.is_err() {
            return;
        }
        at += jitter(profile.per_token_delay_s);
    }
    tokio::time::sleep_until(at).await;
    let mut tail = data_frame(&chunk_json(&id, model, json!({}), Some("stop")));
    if profile.emit_usage {
        let n = pieces.len() as u64;
        let usage = json!({
            "id": id,
            "object": "chat.completion.chunk",
            "created": 0,
            "model": model,
            "choices": [],
            "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": n, "total_tokens": prompt_tokens + n},
        });
        tail.push_str(&data_frame(&usage.to_string()));
    }
    tail.push_str(DONE_FRAME);
    let _ = tx.send(Bytes::from(tail)).await;
}
