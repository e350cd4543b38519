//! Backend process lifecycle and cold-start timing.
//!
//! Cold start is split into three phases on the shared monotonic clock:
//! process launch until the endpoint's TCP port accepts (`t_startup`), port
//! accept until the readiness endpoint answers 200 (`t_load`), and the TTFT
//! of one canary request. `t_cold` is their sum.

use std::collections::VecDeque;
use std::process::Stdio;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::process::{Child, Command};

use super::{CompletionClient, CompletionRequest, OpenAiClient};
use crate::clock;
use crate::config::LaunchSpec;

const POLL_INTERVAL: Duration = Duration::from_millis(10);
/// Port polling during startup; bounds how late the startup/load boundary
/// is observed.
const PORT_POLL_INTERVAL: Duration = Duration::from_millis(2);
const OUTPUT_TAIL_LINES: usize = 40;
const CANARY_PROMPT: &str = "Hello";
/// In attach mode the port must accept within this long.
const ATTACH_CONNECT_GRACE: Duration = Duration::from_secs(3);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColdStartReport {
    pub t_startup_s: f64,
    pub t_load_s: f64,
    pub probe_ttft_s: f64,
    pub t_cold_s: f64,
    /// True when the harness attached to an already-running endpoint.
    pub attached: bool,
}

impl ColdStartReport {
    pub fn new(t_startup_s: f64, t_load_s: f64, probe_ttft_s: f64, attached: bool) -> Self {
        ColdStartReport {
            t_startup_s,
            t_load_s,
            probe_ttft_s,
            t_cold_s: t_startup_s + t_load_s + probe_ttft_s,
            attached,
        }
    }
}

#[derive(Debug, Error)]
pub enum LaunchError {
    #[error("invalid endpoint {0}")]
    InvalidEndpoint(String),
    #[error("failed to spawn backend: {0}")]
    Spawn(String),
    #[error("backend not ready after {elapsed_s:.2}s (phase: {phase}; startup {t_startup_s:?}s, load {t_load_s:?}s){tail}")]
    Timeout {
        phase: &'static str,
        elapsed_s: f64,
        t_startup_s: Option<f64>,
        t_load_s: Option<f64>,
        tail: String,
    },
    #[error("backend exited before ready (status {status}){tail}")]
    Exited { status: String, tail: String },
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("canary request failed: {0}")]
    Canary(String),
}

type Tail = Arc<Mutex<VecDeque<String>>>;

fn format_tail(tail: &Tail) -> String {
    let lines = tail.lock().unwrap();
    if lines.is_empty() {
        String::new()
    } else {
        let joined: Vec<&str> = lines.iter().map(String::as_str).collect();
        format!("\n--- backend output (tail) ---\n{}", joined.join("\n"))
    }
}

/// A launched backend. Dropping it kills the process.
pub struct BackendProcess {
    child: Child,
    pid: Option<u32>,
    tail: Tail,
}

impl BackendProcess {
    pub fn pid(&self) -> Option<u32> {
        self.pid
    }

    pub fn output_tail(&self) -> String {
        format_tail(&self.tail)
    }

    /// Terminates the process group: SIGTERM, then SIGKILL after a grace
    /// period.
    pub async fn shutdown(mut self) {
        if let Some(pid) = self.pid {
            signal_group(pid, libc::SIGTERM);
            let exited = tokio::time::timeout(Duration::from_secs(5), self.child.wait()).await;
            if exited.is_err() {
                signal_group(pid, libc::SIGKILL);
                let _ = self.child.wait().await;
            }
        }
    }
}

fn signal_group(pid: u32, signal: i32) {
    // SAFETY: kill(2) with a negative pid targets the process group created
    // for the child; no memory is touched.
    unsafe {
        libc::kill(-(pid as i32), signal);
    }
}

fn capture<R>(reader: R, tail: Tail)
where
    R: tokio::io::AsyncRead + Unpin + Send + 'static,
{
    tokio::spawn(async move {
        let mut lines = BufReader::new(reader).lines();
        while let Ok(Some(line)) = lines.next_line().await {
            let mut t = tail.lock().unwrap();
            if t.len() == OUTPUT_TAIL_LINES {
                t.pop_front();
            }
            t.push_back(line);
        }
    });
}

fn socket_target(base_url: &str) -> Result<String, LaunchError> {
    let url = reqwest::Url::parse(base_url).map_err(|e| LaunchError::InvalidEndpoint(format!("{base_url}: {e}")))?;
    let host = url
        .host_str()
        .ok_or_else(|| LaunchError::InvalidEndpoint(base_url.to_string()))?;
    let port = url
        .port_or_known_default()
        .ok_or_else(|| LaunchError::InvalidEndpoint(base_url.to_string()))?;
    Ok(format!("{host}:{port}"))
}

async fn port_accepts(target: &str) -> bool {
    matches!(
        tokio::time::timeout(Duration::from_millis(200), tokio::net::TcpStream::connect(target)).await,
        Ok(Ok(_))
    )
}

/// One readiness check: `ready_path`, falling back to `/v1/models` when the
/// primary path does not exist.
async fn ready_once(client: &OpenAiClient, ready_path: &str) -> bool {
    let get = |path: &str| {
        let url = format!("{}{}", client.base_url(), path);
        client
            .authorize(client.http().get(url))
            .timeout(Duration::from_secs(2))
            .send()
    };
    match get(ready_path).await {
        Ok(r) if r.status() == reqwest::StatusCode::OK => true,
        Ok(r) if r.status() == reqwest::StatusCode::NOT_FOUND && ready_path != "/v1/models" => {
            matches!(get("/v1/models").await, Ok(r) if r.status() == reqwest::StatusCode::OK)
        }
        _ => false,
    }
}

async fn canary_ttft(client: &OpenAiClient, budget: Duration) -> Result<f64, LaunchError> {
    let request = CompletionRequest {
        seq: 0,
        instance_id: "canary".to_string(),
        prompt: CANARY_PROMPT.to_string(),
        arrival_time: clock::now(),
    };
    let record = tokio::time::timeout(budget, client.stream_completion(request))
        .await
        .map_err(|_| LaunchError::Canary("timed out".to_string()))?
        .map_err(|e| LaunchError::Canary(e.to_string()))?;
    if !record.is_ok() {
        return Err(LaunchError::Canary(format!(
            "status {}: {}",
            record.status.as_str(),
            record.error.unwrap_or_default()
        )));
    }
    Ok(record.first_token_time - record.dispatch_time)
}

/// Starts the backend described by `spec`, waits for it to become ready, and
/// measures each cold-start phase.
pub async fn launch_and_probe(
    spec: &LaunchSpec,
    client: &OpenAiClient,
    extra_env: &[(String, String)],
) -> Result<(ColdStartReport, BackendProcess), LaunchError> {
    let target = socket_target(client.base_url())?;
    let timeout = Duration::from_secs_f64(spec.ready_timeout_s);

    let mut cmd = Command::new(&spec.command[0]);
    cmd.args(&spec.command[1..])
        .envs(extra_env.iter().map(|(k, v)| (k.as_str(), v.as_str())))
        .envs(&spec.env)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .kill_on_drop(true)
        .process_group(0);

    let launched = clock::now();
    let mut child = cmd.spawn().map_err(|e| LaunchError::Spawn(format!("{}: {e}", spec.command[0])))?;
    let tail: Tail = Arc::new(Mutex::new(VecDeque::new()));
    if let Some(out) = child.stdout.take() {
        capture(out, tail.clone());
    }
    if let Some(err) = child.stderr.take() {
        capture(err, tail.clone());
    }
    let pid = child.id();
    let mut process = BackendProcess { child, pid, tail };
    let deadline = clock::to_instant(launched) + timeout;

    macro_rules! check_alive {
        () => {
            if let Ok(Some(status)) = process.child.try_wait() {
                // Give the output readers a moment to collect the last lines.
                tokio::time::sleep(Duration::from_millis(50)).await;
                return Err(LaunchError::Exited {
                    status: status.to_string(),
                    tail: format_tail(&process.tail),
                });
            }
        };
    }

    // Stamped when the successful connect attempt starts, so the load phase
    // is not shortened by the connect round trip.
    let accepted = loop {
        check_alive!();
        let attempt = clock::now();
        if port_accepts(&target).await {
            break attempt;
        }
        if std::time::Instant::now() >= deadline {
            let elapsed_s = clock::now() - launched;
            let tail = format_tail(&process.tail);
            process.shutdown().await;
            return Err(LaunchError::Timeout {
                phase: "startup",
                elapsed_s,
                t_startup_s: None,
                t_load_s: None,
                tail,
            });
        }
        tokio::time::sleep(PORT_POLL_INTERVAL).await;
    };

    let ready = loop {
        check_alive!();
        if ready_once(client, &spec.ready_path).await {
            break clock::now();
        }
        if std::time::Instant::now() >= deadline {
            let elapsed_s = clock::now() - launched;
            let tail = format_tail(&process.tail);
            process.shutdown().await;
            return Err(LaunchError::Timeout {
                phase: "load",
                elapsed_s,
                t_startup_s: Some(accepted - launched),
                t_load_s: None,
                tail,
            });
        }
        tokio::time::sleep(POLL_INTERVAL).await;
    };

    let remaining = deadline.saturating_duration_since(std::time::Instant::now());
    let ttft = match canary_ttft(client, remaining.max(Duration::from_secs(1))).await {
        Ok(t) => t,
        Err(e) => {
            process.shutdown().await;
            return Err(e);
        }
    };
    Ok((
        ColdStartReport::new(accepted - launched, ready - accepted, ttft, false),
        process,
    ))
}

/// Attach mode: the endpoint is already running, so only readiness is
/// awaited and the canary TTFT measured. Fails fast when the port refuses
/// connections.
pub async fn attach_and_probe(
    client: &OpenAiClient,
    ready_path: &str,
    timeout: Duration,
) -> Result<ColdStartReport, LaunchError> {
    let start = std::time::Instant::now();
    let target = socket_target(client.base_url())?;
    let connect_budget = timeout.min(ATTACH_CONNECT_GRACE);
    while !port_accepts(&target).await {
        if start.elapsed() >= connect_budget {
            return Err(LaunchError::Unreachable(format!(
                "nothing accepts connections at {target} (attach mode does not launch a backend)"
            )));
        }
        tokio::time::sleep(POLL_INTERVAL).await;
    }
    loop {
        if ready_once(client, ready_path).await {
            break;
        }
        if start.elapsed() >= timeout {
            return Err(LaunchError::Timeout {
                phase: "attach",
                elapsed_s: start.elapsed().as_secs_f64(),
                t_startup_s: None,
                t_load_s: None,
                tail: String::new(),
            });
        }
        tokio::time::sleep(POLL_INTERVAL).await;
    }
    let remaining = timeout.saturating_sub(start.elapsed()).max(Duration::from_secs(1));
    let ttft = canary_ttft(client, remaining).await?;
    Ok(ColdStartReport::new(0.0, 0.0, ttft, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cold_start_sum() {
        let r = ColdStartReport::new(2.01, 3.02, 0.2, false);
        assert_eq!(r.t_cold_s, 2.01 + 3.02 + 0.2);
    }

    #[test]
    fn socket_target_parsing() {
        assert_eq!(socket_target("http://127.0.0.1:9000").unwrap(), "127.0.0.1:9000");
        assert_eq!(socket_target("http://localhost").unwrap(), "localhost:80");
        assert!(socket_target("not a url").is_err());
    }
}
