//! System metrics derived from request records and telemetry.
//!
//! Per request, TTFT is measured from dispatch, generation time `T_gen` runs
//! from first token to completion, `TPOT = T_gen / N_t` and `GL = T_gen`.
//! Throughput divides total tokens (sentences) by scenario wall time.
//! Energy multiplies mean power over the generation window by its length.
//! The window is `[first dispatch, last completion]` of the ok records.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::{ColdStartReport, RequestRecord, TokenSource};
use crate::telemetry::TelemetrySeries;

/// z-score of a two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub ttft_s: f64,
    pub tpot_s: f64,
    pub gl_s: f64,
}

/// TTFT, TPOT and GL of one ok record; `None` for non-ok records.
pub fn per_request_latency(record: &RequestRecord) -> Option<Latency> {
    if !record.is_ok() || record.completion_tokens == 0 {
        return None;
    }
    let ttft_s = record.first_token_time - record.dispatch_time;
    let t_gen = record.completion_time - record.first_token_time;
    Some(Latency {
        ttft_s,
        tpot_s: t_gen / record.completion_tokens as f64,
        gl_s: t_gen,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub tps: f64,
    pub sps: f64,
}

/// Tokens and sentences per second of `wall_time_s`, over ok records.
pub fn throughput(records: &[RequestRecord], wall_time_s: f64) -> Throughput {
    if !(wall_time_s > 0.0) {
        return Throughput { tps: 0.0, sps: 0.0 };
    }
    let (tokens, sentences) = records
        .iter()
        .filter(|r| r.is_ok())
        .fold((0u64, 0u64), |(t, s), r| (t + r.completion_tokens, s + r.sentence_count));
    Throughput {
        tps: tokens as f64 / wall_time_s,
        sps: sentences as f64 / wall_time_s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldStat {
    pub mean: f64,
    pub max: f64,
    pub n: usize,
}

fn field_stat(values: impl Iterator<Item = f64>) -> Option<FieldStat> {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        n += 1;
        sum += v;
        max = max.max(v);
    }
    (n > 0).then(|| FieldStat {
        mean: sum / n as f64,
        max,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResourceStats {
    pub gpu_mem_mb: Option<FieldStat>,
    pub gpu_util_pct: Option<FieldStat>,
    pub power_w: Option<FieldStat>,
    pub cpu_pct: Option<FieldStat>,
    pub ram_mb: Option<FieldStat>,
}

/// Mean and max of every field over its valid samples.
pub fn resource_stats(series: &TelemetrySeries) -> ResourceStats {
    let s = &series.samples;
    ResourceStats {
        gpu_mem_mb: field_stat(s.iter().filter_map(|x| x.gpu_mem_mb)),
        gpu_util_pct: field_stat(s.iter().filter_map(|x| x.gpu_util_pct)),
        power_w: field_stat(s.iter().filter_map(|x| x.power_w)),
        cpu_pct: field_stat(s.iter().filter_map(|x| x.cpu_pct)),
        ram_mb: field_stat(s.iter().filter_map(|x| x.ram_mb)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub energy_wh: f64,
    pub energy_j: f64,
    pub energy_per_token_j: Option<f64>,
    pub energy_per_sentence_j: Option<f64>,
}

/// Energy from mean power and generation time.
pub fn energy(mean_power_w: f64, t_gen_s: f64, total_tokens: u64, total_sentences: u64) -> Energy {
    let energy_wh = mean_power_w * t_gen_s / 3600.0;
    let energy_j = mean_power_w * t_gen_s;
    Energy {
        energy_wh,
        energy_j,
        energy_per_token_j: (total_tokens > 0).then(|| energy_j / total_tokens as f64),
        energy_per_sentence_j: (total_sentences > 0).then(|| energy_j / total_sentences as f64),
    }
}

/// Trapezoidal integral of valid power samples, in joules. Reported next to
/// [`energy`] for comparison.
pub fn integrated_energy_j(series: &TelemetrySeries) -> Option<f64> {
    let pts: Vec<(f64, f64)> = series
        .samples
        .iter()
        .filter_map(|s| s.power_w.map(|p| (s.t, p)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    Some(
        pts.windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
            .sum(),
    )
}

/// Runtime GPU memory beyond the model's on-disk size, clamped at zero.
pub fn overhead(mean_mem_mb: f64, model_size_mb: f64) -> f64 {
    (mean_mem_mb - model_size_mb).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSize {
    pub size_mb: f64,
    pub files: usize,
    pub warning: Option<String>,
}

/// Total size in MB (10^6 bytes) of files under `path` whose relative path
/// matches `pattern`. Returns `None` when the path does not exist.
pub fn model_size(path: &Path, pattern: &str) -> Option<ModelSize> {
    if !path.exists() {
        return None;
    }
    let matcher = glob::Pattern::new(pattern).unwrap_or_else(|_| glob::Pattern::new("*").unwrap());
    let opts = glob::MatchOptions {
        require_literal_separator: false,
        ..Default::default()
    };
    let mut bytes = 0u64;
    let mut files = 0usize;
    if path.is_file() {
        bytes = path.metadata().map(|m| m.len()).unwrap_or(0);
        files = 1;
    } else {
        for entry in walkdir::WalkDir::new(path).into_iter().flatten() {
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry.path().strip_prefix(path).unwrap_or(entry.path());
            if matcher.matches_path_with(rel, opts) {
                bytes += entry.metadata().map(|m| m.len()).unwrap_or(0);
                files += 1;
            }
        }
    }
    Some(ModelSize {
        size_mb: bytes as f64 / 1e6,
        files,
        warning: (files == 0).then(|| format!("no model files matching `{pattern}` under {}", path.display())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStat {
    pub mean: f64,
    pub ci95_half_width: Option<f64>,
    pub n: usize,
    pub p50: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
}

/// Nearest-rank percentile of sorted data.
pub fn percentile_nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = ((pct / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Summary statistics; `None` for an empty input. The CI half-width uses
/// the sample standard deviation and is absent for a single value.
pub fn aggregate(values: &[f64]) -> Option<AggregateStat> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ci95_half_width = (n >= 2).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Z_95 * var.sqrt() / (n as f64).sqrt()
    });
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(AggregateStat {
        mean,
        ci95_half_width,
        n,
        p50: percentile_nearest_rank(&sorted, 50.0),
        p95: percentile_nearest_rank(&sorted, 95.0),
        min: sorted[0],
        max: sorted[n - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosReport {
    pub ttft_threshold_s: f64,
    pub e2e_threshold_s: f64,
    pub ttft_violation_rate: f64,
    pub e2e_violation_rate: f64,
}

/// Latency decomposition from the user's point of view.
///
/// `queue` is the harness-side delay from arrival to dispatch. `wait` is
/// TTFT counted from dispatch; scheduling inside the backend is not
/// observable from a client, so it is folded into this figure.
/// `ttft_from_arrival` is what a user perceives and is the figure QoS
/// thresholds apply to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerLatency {
    pub queue_s: Option<AggregateStat>,
    pub wait_s: Option<AggregateStat>,
    pub ttft_from_arrival_s: Option<AggregateStat>,
    pub e2e_s: Option<AggregateStat>,
    pub qos: QosReport,
}

pub fn server_latency(records: &[RequestRecord], qos_ttft_s: f64, qos_e2e_s: f64) -> ServerLatency {
    let ok: Vec<&RequestRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let queue: Vec<f64> = ok.iter().map(|r| r.dispatch_time - r.arrival_time).collect();
    let wait: Vec<f64> = ok.iter().map(|r| r.first_token_time - r.dispatch_time).collect();
    let ttft_arrival: Vec<f64> = ok.iter().map(|r| r.first_token_time - r.arrival_time).collect();
    let e2e: Vec<f64> = ok.iter().map(|r| r.completion_time - r.arrival_time).collect();
    let rate = |vals: &[f64], limit: f64| {
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().filter(|v| **v > limit).count() as f64 / vals.len() as f64
        }
    };
    ServerLatency {
        queue_s: aggregate(&queue),
        wait_s: aggregate(&wait),
        ttft_from_arrival_s: aggregate(&ttft_arrival),
        e2e_s: aggregate(&e2e),
        qos: QosReport {
            ttft_threshold_s: qos_ttft_s,
            e2e_threshold_s: qos_e2e_s,
            ttft_violation_rate: rate(&ttft_arrival, qos_ttft_s),
            e2e_violation_rate: rate(&e2e, qos_e2e_s),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    pub n_requests: usize,
    pub n_ok: usize,
    pub n_errors: usize,
    pub token_count_source: String,
    pub ttft_s: Option<AggregateStat>,
    pub tpot_s: Option<AggregateStat>,
    pub gl_s: Option<AggregateStat>,
    /// Per-request `N_t / T_gen`.
    pub request_tps: Option<AggregateStat>,
    pub tps: f64,
    pub sps: f64,
    pub request_throughput_rps: f64,
    pub total_tokens: u64,
    pub total_sentences: u64,
    pub scenario_wall_time_s: f64,
    /// `[first dispatch, last completion]` of ok records, on the process clock.
    pub generation_window: Option<(f64, f64)>,
    pub resources: ResourceStats,
    pub energy: Option<Energy>,
    pub energy_j_integrated: Option<f64>,
    pub model_size_mb: Option<f64>,
    pub overhead_mb: Option<f64>,
    pub cold_start: Option<ColdStartReport>,
    pub server_latency: ServerLatency,
}

/// Everything needed to compute [`SystemMetrics`] for one run.
pub struct MetricInputs<'a> {
    pub records: &'a [RequestRecord],
    pub scenario_wall_time_s: f64,
    pub telemetry: &'a TelemetrySeries,
    pub cold_start: Option<ColdStartReport>,
    pub model_size_mb: Option<f64>,
    pub qos_ttft_s: f64,
    pub qos_e2e_s: f64,
}

pub fn generation_window(records: &[RequestRecord]) -> Option<(f64, f64)> {
    let ok = records.iter().filter(|r| r.is_ok());
    let start = ok.clone().map(|r| r.dispatch_time).fold(f64::INFINITY, f64::min);
    let end = ok.map(|r| r.completion_time).fold(f64::NEG_INFINITY, f64::max);
    (start.is_finite() && end.is_finite()).then_some((start, end))
}

pub fn token_count_source(records: &[RequestRecord]) -> String {
    let ok = records.iter().filter(|r| r.is_ok());
    let usage = ok.clone().filter(|r| r.token_source == TokenSource::Usage).count();
    let chunks = ok.filter(|r| r.token_source == TokenSource::ChunkCount).count();
    match (usage, chunks) {
        (0, 0) => "none",
        (_, 0) => "usage",
        (0, _) => "chunk_count",
        _ => "mixed",
    }
    .to_string()
}

pub fn compute_system_metrics(inputs: &MetricInputs<'_>) -> SystemMetrics {
    let records = inputs.records;
    let latencies: Vec<Latency> = records.iter().filter_map(per_request_latency).collect();
    let ok: Vec<&RequestRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let total_tokens: u64 = ok.iter().map(|r| r.completion_tokens).sum();
    let total_sentences: u64 = ok.iter().map(|r| r.sentence_count).sum();
    let tp = throughput(records, inputs.scenario_wall_time_s);
    let request_tps: Vec<f64> = ok
        .iter()
        .filter_map(|r| {
            let t_gen = r.completion_time - r.first_token_time;
            (t_gen > 0.0).then(|| r.completion_tokens as f64 / t_gen)
        })
        .collect();

    let window = generation_window(records);
    let windowed = match window {
        Some((a, b)) => inputs.telemetry.window(a, b),
        None => TelemetrySeries::empty(&inputs.telemetry.provider, inputs.telemetry.interval_s),
    };
    let resources = resource_stats(&windowed);
    let energy_metrics = match (resources.power_w, window) {
        (Some(p), Some((a, b))) => Some(energy(p.mean, b - a, total_tokens, total_sentences)),
        _ => None,
    };
    let overhead_mb = match (resources.gpu_mem_mb, inputs.model_size_mb) {
        (Some(m), Some(size)) => Some(overhead(m.mean, size)),
        _ => None,
    };

    SystemMetrics {
        n_requests: records.len(),
        n_ok: ok.len(),
        n_errors: records.len() - ok.len(),
        token_count_source: token_count_source(records),
        ttft_s: aggregate(&latencies.iter().map(|l| l.ttft_s).collect::<Vec<_>>()),
        tpot_s: aggregate(&latencies.iter().map(|l| l.tpot_s).collect::<Vec<_>>()),
        gl_s: aggregate(&latencies.iter().map(|l| l.gl_s).collect::<Vec<_>>()),
        request_tps: aggregate(&request_tps),
        tps: tp.tps,
        sps: tp.sps,
        request_throughput_rps: if inputs.scenario_wall_time_s > 0.0 {
            ok.len() as f64 / inputs.scenario_wall_time_s
        } else {
            0.0
        },
        total_tokens,
        total_sentences,
        scenario_wall_time_s: inputs.scenario_wall_time_s,
        generation_window: window,
        resources,
        energy: energy_metrics,
        energy_j_integrated: integrated_energy_j(&windowed),
        model_size_mb: inputs.model_size_mb,
        overhead_mb,
        cold_start: inputs.cold_start.clone(),
        server_latency: server_latency(records, inputs.qos_ttft_s, inputs.qos_e2e_s),
    }
}
