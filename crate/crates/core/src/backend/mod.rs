//! Inference backend access: process launch, readiness probing, and
//! streaming chat completions over the OpenAI-compatible wire protocol.

mod client;
mod launch;
pub mod sse;
mod text;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{ClientParams, OpenAiClient, API_KEY_ENV};
pub use launch::{attach_and_probe, launch_and_probe, BackendProcess, ColdStartReport, LaunchError};
pub use text::count_sentences;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Ok,
    HttpError,
    StreamError,
    EmptyOutput,
}

impl RequestStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestStatus::Ok => "ok",
            RequestStatus::HttpError => "http_error",
            RequestStatus::StreamError => "stream_error",
            RequestStatus::EmptyOutput => "empty_output",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ok" => RequestStatus::Ok,
            "http_error" => RequestStatus::HttpError,
            "stream_error" => RequestStatus::StreamError,
            "empty_output" => RequestStatus::EmptyOutput,
            _ => return None,
        })
    }
}

/// Where a record's completion token count came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenSource {
    Usage,
    ChunkCount,
}

/// Timing and output of one request. Timestamps are seconds on the
/// process clock (see [`crate::clock`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub seq: u64,
    pub instance_id: String,
    pub arrival_time: f64,
    pub dispatch_time: f64,
    pub first_token_time: f64,
    pub completion_time: f64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: u64,
    pub sentence_count: u64,
    pub output_text: String,
    pub status: RequestStatus,
    pub token_source: TokenSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RequestRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RequestStatus::Ok
    }

    /// `arrival <= dispatch <= first token <= completion`.
    pub fn timestamps_monotone(&self) -> bool {
        self.arrival_time <= self.dispatch_time
            && self.dispatch_time <= self.first_token_time
            && self.first_token_time <= self.completion_time
    }
}

/// One prompt to send, plus the bookkeeping the workload assigns.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub seq: u64,
    pub instance_id: String,
    pub prompt: String,
    pub arrival_time: f64,
}

#[derive(Debug, Error)]
pub enum BackendError {
    /// The backend could not be reached at all.
    #[error("backend unreachable: {0}")]
    Unreachable(String),
}

/// A handle that can run streaming completions; shared across executors.
#[async_trait]
pub trait CompletionClient: Send + Sync {
    async fn stream_completion(
        &self,
        request: CompletionRequest,
    ) -> Result<RequestRecord, BackendError>;
}
