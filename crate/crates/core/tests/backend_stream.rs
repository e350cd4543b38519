use std::time::Duration;

use infer_bench::backend::{
    attach_and_probe, CompletionClient, CompletionRequest, RequestStatus, TokenSource,
};
use infer_bench::clock;
use infer_bench::mockserver::MockProfile;
use tokio::io::{AsyncReadExt, AsyncWriteExt};

mod common;

fn request(seq: u64) -> CompletionRequest {
    CompletionRequest {
        seq,
        instance_id: format!("i{seq}"),
        prompt: "hello".into(),
        arrival_time: clock::now(),
    }
}

#[tokio::test]
async fn stream_timestamps_follow_mock_timing() {
    let mock = common::start_mock(common::profile(0.1, 0.02, 5)).await;
    let client = common::client_for(&mock.base_url(), 64);
    let r = client.stream_completion(request(0)).await.unwrap();
    assert_eq!(r.status, RequestStatus::Ok);
    assert_eq!(r.completion_tokens, 5);
    assert_eq!(r.token_source, TokenSource::Usage);
    assert_eq!(r.output_text, "tok tok tok tok tok ");
    let ttft = r.first_token_time - r.dispatch_time;
    let gen = r.completion_time - r.first_token_time;
    assert!((0.1..0.2).contains(&ttft), "ttft {ttft}");
    assert!((0.09..0.2).contains(&gen), "gen {gen}");
    mock.shutdown().await;
}

#[tokio::test]
async fn chunk_count_when_usage_missing() {
    let profile = MockProfile {
        emit_usage: false,
        ..common::profile(0.0, 0.0, 7)
    };
    let mock = common::start_mock(profile).await;
    let client = common::client_for(&mock.base_url(), 64);
    let r = client.stream_completion(request(1)).await.unwrap();
    assert_eq!(r.completion_tokens, 7);
    assert_eq!(r.token_source, TokenSource::ChunkCount);
    mock.shutdown().await;
}

#[tokio::test]
async fn max_tokens_caps_the_stream() {
    let mock = common::start_mock(common::profile(0.0, 0.0, 50)).await;
    let client = common::client_for(&mock.base_url(), 3);
    let r = client.stream_completion(request(2)).await.unwrap();
    assert_eq!(r.completion_tokens, 3);
    mock.shutdown().await;
}

#[tokio::test]
async fn unreachable_is_an_error() {
    let client = common::client_for(&format!("http://127.0.0.1:{}", common::free_port()), 8);
    assert!(client.stream_completion(request(0)).await.is_err());
}

/// A one-shot HTTP server answering with a fixed raw response.
async fn raw_server(response: &'static str) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        if let Ok((mut sock, _)) = listener.accept().await {
            let mut buf = vec![0u8; 8192];
            let _ = sock.read(&mut buf).await;
            let _ = sock.write_all(response.as_bytes()).await;
            let _ = sock.shutdown().await;
        }
    });
    format!("http://{addr}")
}

#[tokio::test]
async fn http_error_status_recorded() {
    let url = raw_server("HTTP/1.1 500 Internal Server Error\r\ncontent-length: 4\r\nconnection: close\r\n\r\nboom").await;
    let r = common::client_for(&url, 8).stream_completion(request(0)).await.unwrap();
    assert_eq!(r.status, RequestStatus::HttpError);
    assert!(r.error.unwrap().contains("500"));
}

#[tokio::test]
async fn truncated_stream_is_a_stream_error() {
    let url = raw_server(
        "HTTP/1.1 200 OK\r\ncontent-type: text/event-stream\r\nconnection: close\r\n\r\n\
         data: {\"choices\":[{\"delta\":{\"content\":\"hi\"}}]}\n\n",
    )
    .await;
    let r = common::client_for(&url, 8).stream_completion(request(0)).await.unwrap();
    assert_eq!(r.status, RequestStatus::StreamError);
}

#[tokio::test]
async fn malformed_event_is_a_stream_error() {
    let url = raw_server(
        "HTTP/1.1 200 OK\r\ncontent-type: text/event-stream\r\nconnection: close\r\n\r\n\
         data: {not json\n\ndata: [DONE]\n\n",
    )
    .await;
    let r = common::client_for(&url, 8).stream_completion(request(0)).await.unwrap();
    assert_eq!(r.status, RequestStatus::StreamError);
}

#[tokio::test]
async fn empty_stream_is_empty_output() {
    let url = raw_server(
        "HTTP/1.1 200 OK\r\ncontent-type: text/event-stream\r\nconnection: close\r\n\r\ndata: [DONE]\n\n",
    )
    .await;
    let r = common::client_for(&url, 8).stream_completion(request(0)).await.unwrap();
    assert_eq!(r.status, RequestStatus::EmptyOutput);
}

#[tokio::test]
async fn attach_waits_for_readiness() {
    let profile = MockProfile {
        load_delay_s: 0.3,
        ..common::profile(0.05, 0.0, 2)
    };
    let mock = common::start_mock(profile).await;
    let client = common::client_for(&mock.base_url(), 8);
    let t0 = clock::now();
    let cs = attach_and_probe(&client, "/health", Duration::from_secs(5)).await.unwrap();
    assert!(clock::now() - t0 >= 0.25);
    assert!(cs.attached);
    assert_eq!(cs.t_startup_s, 0.0);
    assert!((0.05..0.2).contains(&cs.probe_ttft_s));
    assert_eq!(cs.t_cold_s, cs.t_startup_s + cs.t_load_s + cs.probe_ttft_s);
    mock.shutdown().await;
}
