use std::sync::Arc;

use infer_bench::backend::RequestStatus;
use infer_bench::mockserver::{MockProfile, QueuePolicy};
use infer_bench::workload::{self, ArrivalPlan};

mod common;

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn single_stream_keeps_one_in_flight() {
    let mock = common::start_mock(common::profile(0.01, 0.002, 5)).await;
    let client = Arc::new(common::client_for(&mock.base_url(), 32));
    let out = workload::run_single_stream(&common::instances(6), client).await;
    assert!(!out.aborted);
    assert_eq!(out.records.len(), 6);
    assert_eq!(mock.stats().max_in_flight, 1);
    for (i, r) in out.records.iter().enumerate() {
        assert_eq!(r.seq, i as u64);
        assert!(r.timestamps_monotone());
    }
    for w in out.records.windows(2) {
        assert!(w[1].dispatch_time >= w[0].completion_time);
    }
    mock.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn batch_waves_of_four() {
    let mock = common::start_mock(common::profile(0.05, 0.005, 5)).await;
    let client = Arc::new(common::client_for(&mock.base_url(), 32));
    let out = workload::run_batch(&common::instances(10), 4, client).await;
    assert_eq!(out.waves, vec![4, 4, 2]);
    assert_eq!(out.records.len(), 10);
    assert_eq!(mock.stats().max_in_flight, 4);
    // every request of a wave shares the wave's arrival time
    assert_eq!(out.records[0].arrival_time, out.records[3].arrival_time);
    assert!(out.records[4].arrival_time >= out.records[3].completion_time);
    mock.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn server_dispatches_on_plan() {
    let mock = common::start_mock(common::profile(0.02, 0.005, 4)).await;
    let client = Arc::new(common::client_for(&mock.base_url(), 32));
    let plan = ArrivalPlan {
        per_user_arrivals: vec![vec![0.1, 0.5], vec![0.3]],
        horizon_s: 1.0,
    };
    let out = workload::run_server(&common::instances(2), &plan, client).await;
    assert_eq!(out.records.len(), 3);
    let start = out.scenario_start;
    let offsets: Vec<f64> = out.records.iter().map(|r| r.arrival_time - start).collect();
    for (got, want) in offsets.iter().zip([0.1, 0.3, 0.5]) {
        assert!((got - want).abs() < 1e-9);
    }
    for r in &out.records {
        let lag = r.dispatch_time - r.arrival_time;
        assert!((0.0..0.1).contains(&lag), "dispatch lag {lag}");
    }
    // prompts cycle through instances
    assert_eq!(out.records[2].instance_id, "i0");
    assert!(out.scenario_wall_time_s >= 1.0);
    mock.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn open_loop_does_not_wait_for_responses() {
    let mock = common::start_mock(common::profile(0.5, 0.01, 2)).await;
    let client = Arc::new(common::client_for(&mock.base_url(), 32));
    let plan = ArrivalPlan {
        per_user_arrivals: vec![(0..10).map(|k| 0.05 + 0.02 * k as f64).collect()],
        horizon_s: 0.5,
    };
    let out = workload::run_server(&common::instances(3), &plan, client).await;
    assert_eq!(out.records.len(), 10);
    assert!(mock.stats().max_in_flight >= 8);
    mock.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn reject_policy_yields_http_errors() {
    let profile = MockProfile {
        capacity: 2,
        queue_policy: QueuePolicy::Reject503,
        ..common::profile(0.2, 0.01, 3)
    };
    let mock = common::start_mock(profile).await;
    let client = Arc::new(common::client_for(&mock.base_url(), 32));
    let out = workload::run_batch(&common::instances(5), 5, client).await;
    let errors = out.records.iter().filter(|r| r.status == RequestStatus::HttpError).count();
    assert_eq!(errors, 3);
    assert_eq!(mock.stats().rejected, 3);
    assert!(out.records.iter().filter(|r| r.is_ok()).count() == 2);
    mock.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn unreachable_backend_aborts_with_partial_results() {
    let port = common::free_port();
    let client = Arc::new(common::client_for(&format!("http://127.0.0.1:{port}"), 8));
    let out = workload::run_single_stream(&common::instances(3), client).await;
    assert!(out.aborted);
    assert!(out.records.is_empty());
    assert!(out.abort_reason.unwrap().contains("unreachable"));
}
