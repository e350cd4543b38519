use std::time::Duration;

use async_trait::async_trait;
use futures::StreamExt;
use serde_json::json;

use super::sse::{parse_chunk, SseEvent, SseParser};
use super::{
    count_sentences, BackendError, CompletionClient, CompletionRequest, RequestRecord,
    RequestStatus, TokenSource,
};
use crate::clock;

/// Environment variable holding an optional bearer token.
pub const API_KEY_ENV: &str = "BENCH_API_KEY";

#[derive(Debug, Clone)]
pub struct ClientParams {
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

/// Streaming chat-completions client for OpenAI-compatible servers.
#[derive(Debug, Clone)]
pub struct OpenAiClient {
    http: reqwest::Client,
    base_url: String,
    params: ClientParams,
    api_key: Option<String>,
}

impl OpenAiClient {
    pub fn new(base_url: &str, params: ClientParams) -> Self {
        let http = reqwest::Client::builder()
            .tcp_nodelay(true)
            .pool_idle_timeout(Duration::from_secs(30))
            .build()
            .expect("http client");
        OpenAiClient {
            http,
            base_url: base_url.trim_end_matches('/').to_string(),
            params,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn params(&self) -> &ClientParams {
        &self.params
    }

    pub fn request_body(&self, prompt: &str) -> serde_json::Value {
        json!({
            "model": self.params.model,
            "messages": [{"role": "user", "content": prompt}],
            "stream": true,
            "temperature": self.params.temperature,
            "max_tokens": self.params.max_tokens,
            "stream_options": {"include_usage": true},
        })
    }

    pub(crate) fn http(&self) -> &reqwest::Client {
        &self.http
    }

    pub(crate) fn authorize(&self, req: reqwest::RequestBuilder) -> reqwest::RequestBuilder {
        match &self.api_key {
            Some(key) => req.bearer_auth(key),
            None => req,
        }
    }
}

struct Pending {
    request: CompletionRequest,
    dispatch: f64,
}

impl Pending {
    fn finish(
        self,
        status: RequestStatus,
        first_token: Option<f64>,
        completion: f64,
        text: String,
        chunks: u64,
        usage: (Option<u64>, Option<u64>),
        error: Option<String>,
    ) -> RequestRecord {
        let (prompt_tokens, completion_usage) = usage;
        let (completion_tokens, token_source) = match completion_usage {
            Some(n) => (n, TokenSource::Usage),
            None => (chunks, TokenSource::ChunkCount),
        };
        let status = if status == RequestStatus::Ok && chunks == 0 {
            RequestStatus::EmptyOutput
        } else {
            status
        };
        RequestRecord {
            seq: self.request.seq,
            instance_id: self.request.instance_id,
            arrival_time: self.request.arrival_time.min(self.dispatch),
            dispatch_time: self.dispatch,
            first_token_time: first_token.unwrap_or(completion),
            completion_time: completion,
            prompt_tokens,
            completion_tokens,
            sentence_count: count_sentences(&text),
            output_text: text,
            status,
            token_source,
            error,
        }
    }
}

#[async_trait]
impl CompletionClient for OpenAiClient {
    async fn stream_completion(
        &self,
        request: CompletionRequest,
    ) -> Result<RequestRecord, BackendError> {
        let url = format!("{}/v1/chat/completions", self.base_url);
        let built = self
            .authorize(self.http.post(&url).json(&self.request_body(&request.prompt)))
            .build()
            .map_err(|e| BackendError::Unreachable(e.to_string()))?;

        let dispatch = clock::now();
        let pending = Pending { request, dispatch };
        let response = match self.http.execute(built).await {
            Ok(r) => r,
            Err(e) if e.is_connect() => return Err(BackendError::Unreachable(e.to_string())),
            Err(e) => {
                let t = clock::now();
                return Ok(pending.finish(
                    RequestStatus::HttpError,
                    None,
                    t,
                    String::new(),
                    0,
                    (None, None),
                    Some(e.to_string()),
                ));
            }
        };

        let status = response.status();
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            let t = clock::now();
            return Ok(pending.finish(
                RequestStatus::HttpError,
                None,
                t,
                String::new(),
                0,
                (None, None),
                Some(format!("HTTP {}: {}", status.as_u16(), body)),
            ));
        }

        let mut stream = response.bytes_stream();
        let mut parser = SseParser::new();
        let mut text = String::new();
        let mut chunks = 0u64;
        let mut first_token = None;
        let mut usage = (None, None);
        let mut outcome: Option<(RequestStatus, f64, Option<String>)> = None;

        'read: while let Some(item) = stream.next().await {
            let received = clock::now();
            let bytes = match item {
                Ok(b) => b,
                Err(e) => {
                    outcome = Some((RequestStatus::StreamError, received, Some(e.to_string())));
                    break;
                }
            };
            for event in parser.push(&bytes) {
                match event {
                    SseEvent::Done => {
                        outcome = Some((RequestStatus::Ok, received, None));
                        break 'read;
                    }
                    SseEvent::Data(payload) => match parse_chunk(&payload) {
                        Ok(fields) => {
                            if let Some(content) = fields.content.filter(|c| !c.is_empty()) {
                                first_token.get_or_insert(received);
                                chunks += 1;
                                text.push_str(&content);
                            }
                            if fields.completion_tokens.is_some() {
                                usage = (fields.prompt_tokens, fields.completion_tokens);
                            }
                        }
                        Err(e) => {
                            outcome = Some((RequestStatus::StreamError, received, Some(e)));
                            break 'read;
                        }
                    },
                }
            }
        }

        let (status, completion, error) = match outcome {
            Some(o) => {
                // Drain so the connection can go back to the pool.
                if o.0 == RequestStatus::Ok {
                    while let Some(Ok(_)) = stream.next().await {}
                }
                o
            }
            None => {
                let t = clock::now();
                if parser.finish().contains(&SseEvent::Done) {
                    (RequestStatus::Ok, t, None)
                } else {
                    (
                        RequestStatus::StreamError,
                        t,
                        Some("stream ended without [DONE]".to_string()),
                    )
                }
            }
        };
        Ok(pending.finish(status, first_token, completion, text, chunks, usage, error))
    }
}
