#![allow(dead_code)]

pub mod oracles;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use infer_bench::backend::{ClientParams, OpenAiClient, RequestRecord, RequestStatus, TokenSource};
use infer_bench::mockserver::{self, MockProfile, MockServer};
use infer_bench::task::TaskInstance;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_infer-bench")
}

pub fn run_bin(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

pub fn profile(ttft: f64, per_token: f64, tokens: u64) -> MockProfile {
    MockProfile {
        ttft_s: ttft,
        per_token_delay_s: per_token,
        tokens_per_response: tokens,
        ..MockProfile::default()
    }
}

pub async fn start_mock(profile: MockProfile) -> MockServer {
    let addr: SocketAddr = "127.0.0.1:0".parse().unwrap();
    mockserver::serve(profile, addr).await.expect("mock starts")
}

pub fn client_for(base_url: &str, max_tokens: u32) -> OpenAiClient {
    OpenAiClient::new(
        base_url,
        ClientParams {
            model: "mock".into(),
            max_tokens,
            temperature: 0.0,
        },
    )
}

pub fn instances(n: usize) -> Vec<TaskInstance> {
    (0..n)
        .map(|i| TaskInstance {
            id: format!("i{i}"),
            prompt: format!("prompt {i}"),
            references: vec![],
            aux: Default::default(),
        })
        .collect()
}

pub fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

/// A synthetic ok record.
pub fn record(seq: u64, dispatch: f64, first: f64, done: f64, tokens: u64) -> RequestRecord {
    RequestRecord {
        seq,
        instance_id: format!("r{seq}"),
        arrival_time: dispatch,
        dispatch_time: dispatch,
        first_token_time: first,
        completion_time: done,
        prompt_tokens: None,
        completion_tokens: tokens,
        sentence_count: 1,
        output_text: String::new(),
        status: RequestStatus::Ok,
        token_source: TokenSource::Usage,
        error: None,
    }
}

/// Writes a config file for the binary into `dir` and returns its path.
pub fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("bench.yaml");
    std::fs::write(&path, body).unwrap();
    path
}

/// A single-host config against `endpoint` over the MMLU fixture.
pub fn mmlu_config(endpoint: &str, extra: &str) -> String {
    format!(
        "model_id: mock/model\ntask: mmlu\ndataset_path: {}\nscenario: single\nsamples: 4\nendpoint_url: {endpoint}\nmax_output_tokens: 64\n{extra}",
        fixture("mmlu.jsonl").display()
    )
}

/// Starts `infer-bench mock-serve` in the background and waits until it
/// listens.
pub struct MockProcess {
    child: Option<std::process::Child>,
    pub port: u16,
}

impl MockProcess {
    pub fn spawn(profile: &Path) -> MockProcess {
        let port = free_port();
        let child = Command::new(bin())
            .args(["mock-serve", "--profile", profile.to_str().unwrap(), "--port", &port.to_string()])
            .stdout(std::process::Stdio::piped())
            .stderr(std::process::Stdio::piped())
            .spawn()
            .unwrap();
        let deadline = std::time::Instant::now() + std::time::Duration::from_secs(20);
        while std::net::TcpStream::connect(("127.0.0.1", port)).is_err() {
            assert!(std::time::Instant::now() < deadline, "mock-serve did not start");
            std::thread::sleep(std::time::Duration::from_millis(20));
        }
        MockProcess { child: Some(child), port }
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    /// Sends SIGINT and collects the output.
    pub fn interrupt(mut self) -> Output {
        let child = self.child.take().unwrap();
        unsafe {
            libc::kill(child.id() as i32, libc::SIGINT);
        }
        child.wait_with_output().unwrap()
    }
}

impl Drop for MockProcess {
    fn drop(&mut self) {
        if let Some(c) = self.child.as_mut() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}
