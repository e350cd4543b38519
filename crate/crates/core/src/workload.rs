//! Serving scenarios: single-stream, batch waves, and open-loop server
//! traffic with Poisson arrivals.
//!
//! Executors send finished records over one channel to a collector; the
//! outcome lists records in sequence order. Sequence numbers follow
//! dispatch order for single/batch and planned arrival order for server.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

use crate::backend::{CompletionClient, CompletionRequest, RequestRecord};
use crate::clock;
use crate::task::TaskInstance;

/// Fixed step of the server scheduler loop.
pub const TICK: Duration = Duration::from_millis(10);
/// The scheduler counts as saturated when it runs this many ticks late.
pub const SATURATION_TICKS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalPlan {
    pub per_user_arrivals: Vec<Vec<f64>>,
    pub horizon_s: f64,
}

impl ArrivalPlan {
    pub fn total(&self) -> usize {
        self.per_user_arrivals.iter().map(Vec::len).sum()
    }

    /// All arrivals as `(offset, user)`, ordered by offset then user.
    pub fn merged(&self) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = self
            .per_user_arrivals
            .iter()
            .enumerate()
            .flat_map(|(u, offs)| offs.iter().map(move |&o| (o, u)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }

    /// Writes one `user_id,offset_s` line per arrival.
    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "user_id,offset_s")?;
        for (offset, user) in self.merged() {
            writeln!(f, "{user},{offset}")?;
        }
        f.flush()
    }
}

/// Plans per-user Poisson arrivals: i.i.d. exponential gaps with rate
/// `rate_rpm / 60` per second, cut at `horizon_s`. Each user draws from its
/// own stream of a generator seeded with `seed`.
pub fn plan_arrivals(users: usize, rate_rpm: f64, horizon_s: f64, seed: u64) -> ArrivalPlan {
    assert!(rate_rpm > 0.0, "rate must be positive");
    let gaps = Exp::new(rate_rpm / 60.0).expect("positive rate");
    let per_user_arrivals = (0..users)
        .map(|user| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(user as u64);
            let mut offsets = Vec::new();
            let mut t = 0.0;
            loop {
                let gap: f64 = gaps.sample(&mut rng);
                if gap <= 0.0 {
                    continue;
                }
                t += gap;
                if t >= horizon_s {
                    break;
                }
                offsets.push(t);
            }
            offsets
        })
        .collect();
    ArrivalPlan {
        per_user_arrivals,
        horizon_s,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub records: Vec<RequestRecord>,
    /// Clock reading when the scenario started.
    pub scenario_start: f64,
    pub scenario_wall_time_s: f64,
    pub aborted: bool,
    pub abort_reason: Option<String>,
    /// Batch wave sizes in submission order (empty for other scenarios).
    pub waves: Vec<usize>,
    pub warnings: Vec<String>,
}

impl ScenarioOutcome {
    fn new(start: f64) -> Self {
        ScenarioOutcome {
            records: Vec::new(),
            scenario_start: start,
            scenario_wall_time_s: 0.0,
            aborted: false,
            abort_reason: None,
            waves: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn abort(&mut self, reason: String) {
        if !self.aborted {
            self.aborted = true;
            self.abort_reason = Some(reason);
        }
    }
}

type RecordTx = mpsc::UnboundedSender<RequestRecord>;

fn collect(mut rx: mpsc::UnboundedReceiver<RequestRecord>) -> Vec<RequestRecord> {
    let mut records = Vec::new();
    while let Ok(r) = rx.try_recv() {
        records.push(r);
    }
    records.sort_by_key(|r| r.seq);
    records
}

/// One request at a time: the next prompt is sent only after the previous
/// response completes.
pub async fn run_single_stream<C>(instances: &[TaskInstance], client: Arc<C>) -> ScenarioOutcome
where
    C: CompletionClient + ?Sized,
{
    let (tx, rx) = mpsc::unbounded_channel();
    let mut outcome = ScenarioOutcome::new(clock::now());
    for (i, inst) in instances.iter().enumerate() {
        let request = CompletionRequest {
            seq: i as u64,
            instance_id: inst.id.clone(),
            prompt: inst.prompt.clone(),
            arrival_time: clock::now(),
        };
        match client.stream_completion(request).await {
            Ok(record) => {
                let _ = tx.send(record);
            }
            Err(e) => {
                outcome.abort(format!("request {i} failed: {e}"));
                break;
            }
        }
    }
    drop(tx);
    outcome.records = collect(rx);
    outcome.scenario_wall_time_s = clock::now() - outcome.scenario_start;
    outcome
}

/// Consecutive waves of `batch_size` concurrent requests; a wave starts only
/// after the previous one has fully completed.
pub async fn run_batch<C>(
    instances: &[TaskInstance],
    batch_size: usize,
    client: Arc<C>,
) -> ScenarioOutcome
where
    C: CompletionClient + ?Sized + 'static,
{
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let (tx, rx) = mpsc::unbounded_channel();
    let mut outcome = ScenarioOutcome::new(clock::now());
    let mut seq = 0u64;
    for wave in instances.chunks(batch_size) {
        let wave_start = clock::now();
        let mut handles = Vec::with_capacity(wave.len());
        for inst in wave {
            let request = CompletionRequest {
                seq,
                instance_id: inst.id.clone(),
                prompt: inst.prompt.clone(),
                arrival_time: wave_start,
            };
            seq += 1;
            let client = client.clone();
            let tx: RecordTx = tx.clone();
            handles.push(tokio::spawn(async move {
                let result = client.stream_completion(request).await;
                match result {
                    Ok(record) => {
                        let _ = tx.send(record);
                        None
                    }
                    Err(e) => Some(e.to_string()),
                }
            }));
        }
        outcome.waves.push(wave.len());
        for h in handles {
            match h.await {
                Ok(Some(err)) => outcome.abort(err),
                Ok(None) => {}
                Err(join) => outcome.abort(format!("executor panicked: {join}")),
            }
        }
        if outcome.aborted {
            break;
        }
    }
    drop(tx);
    outcome.records = collect(rx);
    outcome.scenario_wall_time_s = clock::now() - outcome.scenario_start;
    outcome
}

/// Open-loop server traffic: each planned arrival is dispatched on the
/// scheduler tick at or after its offset, with no limit on requests in
/// flight. Prompts cycle through `instances`. The scenario ends when the
/// horizon has passed and every request has completed.
pub async fn run_server<C>(
    instances: &[TaskInstance],
    plan: &ArrivalPlan,
    client: Arc<C>,
) -> ScenarioOutcome
where
    C: CompletionClient + ?Sized + 'static,
{
    let (tx, rx) = mpsc::unbounded_channel();
    let start = clock::now();
    let start_instant = clock::to_instant(start);
    let mut outcome = ScenarioOutcome::new(start);
    let arrivals = plan.merged();
    let abort_flag = Arc::new(std::sync::Mutex::new(None::<String>));
    let mut handles = Vec::with_capacity(arrivals.len());

    if !instances.is_empty() {
        let mut ticker = tokio::time::interval_at(tokio::time::Instant::from_std(start_instant), TICK);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        let mut next = 0usize;
        let mut max_lag = 0.0f64;
        let mut late = 0usize;
        while next < arrivals.len() {
            ticker.tick().await;
            if abort_flag.lock().unwrap().is_some() {
                break;
            }
            let elapsed = clock::now() - start;
            while next < arrivals.len() && arrivals[next].0 <= elapsed {
                let (offset, _user) = arrivals[next];
                let lag = elapsed - offset;
                if lag > SATURATION_TICKS as f64 * TICK.as_secs_f64() {
                    late += 1;
                }
                max_lag = max_lag.max(lag);
                let inst = &instances[next % instances.len()];
                let request = CompletionRequest {
                    seq: next as u64,
                    instance_id: inst.id.clone(),
                    prompt: inst.prompt.clone(),
                    arrival_time: start + offset,
                };
                let client = client.clone();
                let tx: RecordTx = tx.clone();
                let abort_flag = abort_flag.clone();
                handles.push(tokio::spawn(async move {
                    match client.stream_completion(request).await {
                        Ok(record) => {
                            let _ = tx.send(record);
                        }
                        Err(e) => {
                            abort_flag.lock().unwrap().get_or_insert(e.to_string());
                        }
                    }
                }));
                next += 1;
            }
        }
        if late > 0 {
            outcome.warnings.push(format!(
                "harness saturation: {late} dispatches ran more than {SATURATION_TICKS} ticks late (max lag {:.3}s)",
                max_lag
            ));
        }
    }

    let horizon_end = tokio::time::Instant::from_std(start_instant + Duration::from_secs_f64(plan.horizon_s));
    tokio::time::sleep_until(horizon_end).await;
    for h in handles {
        if let Err(join) = h.await {
            outcome.abort(format!("executor panicked: {join}"));
        }
    }
    if let Some(reason) = abort_flag.lock().unwrap().take() {
        outcome.abort(reason);
    }
    drop(tx);
    outcome.records = collect(rx);
    outcome.scenario_wall_time_s = clock::now() - start;
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_is_deterministic() {
        let a = plan_arrivals(4, 12.0, 120.0, 9);
        let b = plan_arrivals(4, 12.0, 120.0, 9);
        assert_eq!(a, b);
        assert_ne!(a, plan_arrivals(4, 12.0, 120.0, 10));
    }

    #[test]
    fn plan_offsets_within_horizon_and_increasing() {
        let plan = plan_arrivals(8, 30.0, 60.0, 1);
        for user in &plan.per_user_arrivals {
            assert!(user.windows(2).all(|w| w[0] < w[1]));
            assert!(user.iter().all(|&o| (0.0..60.0).contains(&o)));
        }
    }

    #[test]
    fn users_get_distinct_streams() {
        let plan = plan_arrivals(2, 12.0, 600.0, 3);
        assert_ne!(plan.per_user_arrivals[0], plan.per_user_arrivals[1]);
    }

    #[test]
    fn merged_is_sorted() {
        let plan = plan_arrivals(3, 60.0, 30.0, 5);
        let merged = plan.merged();
        assert_eq!(merged.len(), plan.total());
        assert!(merged.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn plan_dump_format() {
        let plan = ArrivalPlan {
            per_user_arrivals: vec![vec![1.5], vec![0.5]],
            horizon_s: 2.0,
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        plan.write_to(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text, "user_id,offset_s\n1,0.5\n0,1.5\n");
    }
}
