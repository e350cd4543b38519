//! Server-sent-event framing for chat-completion streams.
//!
//! Frames are `data: <json>\n\n`; the stream ends with `data: [DONE]\n\n`.
//! The parser is incremental because network reads split frames at
//! arbitrary byte positions.

pub const DONE_FRAME: &str = "data: [DONE]\n\n";

/// Encodes one JSON payload as an SSE frame.
pub fn data_frame(json: &str) -> String {
    format!("data: {json}\n\n")
}

#[derive(Debug, Clone, PartialEq)]
pub enum SseEvent {
    Data(String),
    Done,
}

#[derive(Debug, Default)]
pub struct SseParser {
    buf: Vec<u8>,
    data: Vec<String>,
}

impl SseParser {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds bytes and returns every event completed by them.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<SseEvent> {
        self.buf.extend_from_slice(bytes);
        let mut events = Vec::new();
        while let Some(pos) = self.buf.iter().position(|&b| b == b'\n') {
            let mut line: Vec<u8> = self.buf.drain(..=pos).collect();
            line.pop();
            if line.last() == Some(&b'\r') {
                line.pop();
            }
            let line = String::from_utf8_lossy(&line).into_owned();
            self.handle_line(&line, &mut events);
        }
        events
    }

    /// Flushes a final event that was not followed by a blank line.
    pub fn finish(&mut self) -> Vec<SseEvent> {
        let mut events = Vec::new();
        if !self.buf.is_empty() {
            let rest = String::from_utf8_lossy(&std::mem::take(&mut self.buf)).into_owned();
            self.handle_line(rest.trim_end_matches('\r'), &mut events);
        }
        self.dispatch(&mut events);
        events
    }

    fn handle_line(&mut self, line: &str, events: &mut Vec<SseEvent>) {
        if line.is_empty() {
            self.dispatch(events);
        } else if let Some(rest) = line.strip_prefix("data:") {
            self.data.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
        }
        // Comments (`:`), `event:`, `id:` and `retry:` lines carry nothing
        // the client uses.
    }

    fn dispatch(&mut self, events: &mut Vec<SseEvent>) {
        if self.data.is_empty() {
            return;
        }
        let payload = self.data.join("\n");
        self.data.clear();
        if payload.trim() == "[DONE]" {
            events.push(SseEvent::Done);
        } else {
            events.push(SseEvent::Data(payload));
        }
    }
}

/// Fields of a stream chunk the client reads.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChunkFields {
    pub content: Option<String>,
    pub completion_tokens: Option<u64>,
    pub prompt_tokens: Option<u64>,
}

/// Extracts `choices[0].delta.content` and `usage` from a chunk payload.
pub fn parse_chunk(payload: &str) -> Result<ChunkFields, String> {
    let value: serde_json::Value =
        serde_json::from_str(payload).map_err(|e| format!("malformed stream event: {e}"))?;
    if !value.is_object() {
        return Err("stream event is not a JSON object".to_string());
    }
    if let Some(err) = value.get("error") {
        return Err(format!("backend reported error in stream: {err}"));
    }
    let content = value
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("delta"))
        .and_then(|d| d.get("content"))
        .and_then(|c| c.as_str())
        .map(str::to_string);
    let usage = value.get("usage").filter(|u| !u.is_null());
    Ok(ChunkFields {
        content,
        completion_tokens: usage.and_then(|u| u.get("completion_tokens")).and_then(|v| v.as_u64()),
        prompt_tokens: usage.and_then(|u| u.get("prompt_tokens")).and_then(|v| v.as_u64()),
    })
}
