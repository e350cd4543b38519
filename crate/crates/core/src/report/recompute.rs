//! Re-derives every reported aggregate from the emitted raw files and checks
//! it against the report object.
//!
//! The arithmetic here is written separately from the metrics module so the
//! two act as cross-checks on each other.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{load_report, read_records_csv, RecordRow, ReportError, RunReport};
use crate::backend::RequestStatus;
use crate::metrics::AggregateStat;
use crate::telemetry::TelemetrySeries;

pub const RELATIVE_TOLERANCE: f64 = 1e-9;
/// Floor for values that are zero up to rounding of the relative timestamps.
const ABSOLUTE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecomputeCheck {
    pub name: String,
    pub reported: Option<f64>,
    pub recomputed: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecomputeOutcome {
    pub checks: Vec<RecomputeCheck>,
}

impl RecomputeOutcome {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> Vec<&RecomputeCheck> {
        self.checks.iter().filter(|c| !c.ok).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let v = |x: Option<f64>| x.map(|x| format!("{x}")).unwrap_or_else(|| "absent".into());
            s.push_str(&format!(
                "{} {:<48} reported={} recomputed={}\n",
                if c.ok { "ok  " } else { "FAIL" },
                c.name,
                v(c.reported),
                v(c.recomputed)
            ));
        }
        s.push_str(&format!(
            "{} of {} checks passed\n",
            self.checks.iter().filter(|c| c.ok).count(),
            self.checks.len()
        ));
        s
    }
}

pub fn close(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= RELATIVE_TOLERANCE * a.abs().max(b.abs()) + ABSOLUTE_FLOOR
}

struct Checker {
    checks: Vec<RecomputeCheck>,
}

impl Checker {
    fn value(&mut self, name: &str, reported: Option<f64>, recomputed: Option<f64>) {
        let ok = match (reported, recomputed) {
            (None, None) => true,
            (Some(a), Some(b)) => close(a, b),
            _ => false,
        };
        self.checks.push(RecomputeCheck {
            name: name.to_string(),
            reported,
            recomputed,
            ok,
        });
    }

    fn stat(&mut self, name: &str, reported: &Option<AggregateStat>, values: &[f64]) {
        let r = summarize(values);
        self.value(&format!("{name}.n"), reported.map(|a| a.n as f64), r.as_ref().map(|x| x.n as f64));
        self.value(&format!("{name}.mean"), reported.map(|a| a.mean), r.as_ref().map(|x| x.mean));
        self.value(
            &format!("{name}.ci95_half_width"),
            reported.and_then(|a| a.ci95_half_width),
            r.as_ref().and_then(|x| x.ci95),
        );
        self.value(&format!("{name}.p50"), reported.map(|a| a.p50), r.as_ref().map(|x| x.p50));
        self.value(&format!("{name}.p95"), reported.map(|a| a.p95), r.as_ref().map(|x| x.p95));
        self.value(&format!("{name}.min"), reported.map(|a| a.min), r.as_ref().map(|x| x.min));
        self.value(&format!("{name}.max"), reported.map(|a| a.max), r.as_ref().map(|x| x.max));
    }
}

struct Summary {
    n: usize,
    mean: f64,
    ci95: Option<f64>,
    p50: f64,
    p95: f64,
    min: f64,
    max: f64,
}

fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let ci95 = if n > 1 {
        let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
        Some(1.96 * (ss / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt())
    } else {
        None
    };
    // nearest rank: the k-th smallest with k = ceil(p * n / 100)
    let rank = |p: f64| {
        let k = (p * n as f64 / 100.0).ceil() as usize;
        v[k.max(1).min(n) - 1]
    };
    Some(Summary {
        n,
        mean,
        ci95,
        p50: rank(50.0),
        p95: rank(95.0),
        min: v[0],
        max: v[n - 1],
    })
}

fn mean_max(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    (Some(mean), Some(max))
}

/// Checks `report` against its raw rows and telemetry trace.
pub fn recompute(report: &RunReport, rows: &[RecordRow], telemetry: &TelemetrySeries) -> RecomputeOutcome {
    let m = &report.metrics;
    let mut ck = Checker { checks: Vec::new() };
    let ok: Vec<&RecordRow> = rows.iter().filter(|r| r.status == RequestStatus::Ok).collect();
    let lat: Vec<&RecordRow> = ok.iter().copied().filter(|r| r.n_tokens > 0).collect();

    ck.value("n_requests", Some(m.n_requests as f64), Some(rows.len() as f64));
    ck.value("n_ok", Some(m.n_ok as f64), Some(ok.len() as f64));

    let ttft: Vec<f64> = lat.iter().map(|r| r.first_token_s - r.dispatch_s).collect();
    let gl: Vec<f64> = lat.iter().map(|r| r.completion_s - r.first_token_s).collect();
    let tpot: Vec<f64> = lat
        .iter()
        .map(|r| (r.completion_s - r.first_token_s) / r.n_tokens as f64)
        .collect();
    ck.stat("ttft_s", &m.ttft_s, &ttft);
    ck.stat("tpot_s", &m.tpot_s, &tpot);
    ck.stat("gl_s", &m.gl_s, &gl);
    let req_tps: Vec<f64> = ok
        .iter()
        .filter(|r| r.completion_s > r.first_token_s)
        .map(|r| r.n_tokens as f64 / (r.completion_s - r.first_token_s))
        .collect();
    ck.stat("request_tps", &m.request_tps, &req_tps);

    let tokens: u64 = ok.iter().map(|r| r.n_tokens).sum();
    let sentences: u64 = ok.iter().map(|r| r.n_sentences).sum();
    let wall = m.scenario_wall_time_s;
    ck.value("total_tokens", Some(m.total_tokens as f64), Some(tokens as f64));
    ck.value("total_sentences", Some(m.total_sentences as f64), Some(sentences as f64));
    let per_wall = |x: f64| if wall > 0.0 { x / wall } else { 0.0 };
    ck.value("tps", Some(m.tps), Some(per_wall(tokens as f64)));
    ck.value("sps", Some(m.sps), Some(per_wall(sentences as f64)));
    ck.value("request_throughput_rps", Some(m.request_throughput_rps), Some(per_wall(ok.len() as f64)));

    // Generation window and resource figures, in scenario-relative time.
    let window = if ok.is_empty() {
        None
    } else {
        let a = ok.iter().map(|r| r.dispatch_s).fold(f64::MAX, f64::min);
        let b = ok.iter().map(|r| r.completion_s).fold(f64::MIN, f64::max);
        Some((a, b))
    };
    ck.value(
        "generation_window.length",
        m.generation_window.map(|(a, b)| b - a),
        window.map(|(a, b)| b - a),
    );
    let inside: Vec<_> = match window {
        Some((a, b)) => telemetry.samples.iter().filter(|s| s.t >= a && s.t <= b).collect(),
        None => Vec::new(),
    };
    let fields: [(&str, fn(&crate::telemetry::TelemetrySample) -> Option<f64>, _); 5] = [
        ("gpu_mem_mb", |s| s.gpu_mem_mb, m.resources.gpu_mem_mb),
        ("gpu_util_pct", |s| s.gpu_util_pct, m.resources.gpu_util_pct),
        ("power_w", |s| s.power_w, m.resources.power_w),
        ("cpu_pct", |s| s.cpu_pct, m.resources.cpu_pct),
        ("ram_mb", |s| s.ram_mb, m.resources.ram_mb),
    ];
    let mut power_mean = None;
    let mut mem_mean = None;
    for (name, get, reported) in fields {
        let vals: Vec<f64> = inside.iter().filter_map(|s| get(s)).collect();
        let (mean, max) = mean_max(&vals);
        ck.value(&format!("{name}.mean"), reported.map(|f| f.mean), mean);
        ck.value(&format!("{name}.max"), reported.map(|f| f.max), max);
        if name == "power_w" {
            power_mean = mean;
        }
        if name == "gpu_mem_mb" {
            mem_mean = mean;
        }
    }

    let e_j = match (power_mean, window) {
        (Some(p), Some((a, b))) => Some(p * (b - a)),
        _ => None,
    };
    let e = m.energy;
    ck.value("energy_j", e.map(|e| e.energy_j), e_j);
    ck.value("energy_wh", e.map(|e| e.energy_wh), e_j.map(|j| j / 3600.0));
    ck.value(
        "energy_per_token_j",
        e.and_then(|e| e.energy_per_token_j),
        e_j.filter(|_| tokens > 0).map(|j| j / tokens as f64),
    );
    ck.value(
        "energy_per_sentence_j",
        e.and_then(|e| e.energy_per_sentence_j),
        e_j.filter(|_| sentences > 0).map(|j| j / sentences as f64),
    );
    let power_pts: Vec<(f64, f64)> = inside.iter().filter_map(|s| s.power_w.map(|p| (s.t, p))).collect();
    let trapz = (power_pts.len() >= 2).then(|| {
        let mut acc = 0.0;
        for i in 1..power_pts.len() {
            acc += 0.5 * (power_pts[i].1 + power_pts[i - 1].1) * (power_pts[i].0 - power_pts[i - 1].0);
        }
        acc
    });
    ck.value("energy_j_integrated", m.energy_j_integrated, trapz);
    let over = match (mem_mean, m.model_size_mb) {
        (Some(mem), Some(size)) => Some(if mem > size { mem - size } else { 0.0 }),
        _ => None,
    };
    ck.value("overhead_mb", m.overhead_mb, over);

    if let Some(cs) = &report.cold_start {
        ck.value("t_cold_s", Some(cs.t_cold_s), Some(cs.t_startup_s + cs.t_load_s + cs.probe_ttft_s));
    }

    let sl = &m.server_latency;
    let queue: Vec<f64> = ok.iter().map(|r| r.dispatch_s - r.arrival_s).collect();
    let wait: Vec<f64> = ok.iter().map(|r| r.first_token_s - r.dispatch_s).collect();
    let from_arrival: Vec<f64> = ok.iter().map(|r| r.first_token_s - r.arrival_s).collect();
    let e2e: Vec<f64> = ok.iter().map(|r| r.completion_s - r.arrival_s).collect();
    ck.stat("queue_s", &sl.queue_s, &queue);
    ck.stat("wait_s", &sl.wait_s, &wait);
    ck.stat("ttft_from_arrival_s", &sl.ttft_from_arrival_s, &from_arrival);
    ck.stat("e2e_s", &sl.e2e_s, &e2e);
    let frac = |v: &[f64], t: f64| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().filter(|x| **x > t).count() as f64 / v.len() as f64
        }
    };
    ck.value(
        "qos.ttft_violation_rate",
        Some(sl.qos.ttft_violation_rate),
        Some(frac(&from_arrival, sl.qos.ttft_threshold_s)),
    );
    ck.value(
        "qos.e2e_violation_rate",
        Some(sl.qos.e2e_violation_rate),
        Some(frac(&e2e, sl.qos.e2e_threshold_s)),
    );

    for q in &report.quality {
        let n = q.per_instance.len();
        let mean = if n == 0 {
            0.0
        } else {
            q.per_instance.iter().map(|(_, v)| *v).sum::<f64>() / n as f64
        };
        ck.value(&format!("quality.{}", q.metric_name), Some(q.value), Some(mean));
    }
    RecomputeOutcome { checks: ck.checks }
}

/// Loads the files of an emitted report directory and runs [`recompute`].
pub fn recompute_dir(dir: &Path) -> Result<RecomputeOutcome, ReportError> {
    let report = load_report(dir)?;
    let rows = read_records_csv(&dir.join(&report.files.records))?;
    let tpath = dir.join(&report.files.telemetry);
    let telemetry = TelemetrySeries::read_csv(&tpath, 0.0, &report.environment.telemetry_provider, 0.0)
        .map_err(|e| ReportError::Malformed {
            path: tpath.display().to_string(),
            message: e.to_string(),
        })?;
    Ok(recompute(&report, &rows, &telemetry))
}
