//! Run reports: the JSON report object, the per-request table, the telemetry
//! trace and a plain-text summary, plus cross-run comparison.
//!
//! Timestamps in emitted files are relative to scenario start.

pub mod compare;
pub mod pareto;
pub mod recompute;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{ColdStartReport, RequestRecord, RequestStatus};
use crate::config::BenchmarkConfig;
use crate::metrics::{per_request_latency, AggregateStat, FieldStat, SystemMetrics};
use crate::task::QualityScore;
use crate::telemetry::TelemetrySeries;

pub use compare::{compare_files, compare_reports, delta_pct, CompareError, Comparison, ComparisonCell};
pub use pareto::{pareto_frontier, ParetoPoint};
pub use recompute::{recompute_dir, RecomputeCheck, RecomputeOutcome};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const ARRIVALS_FILE: &str = "arrivals.csv";

pub const RECORD_COLUMNS: [&str; 13] = [
    "seq",
    "instance_id",
    "arrival_s",
    "dispatch_s",
    "first_token_s",
    "completion_s",
    "n_tokens",
    "n_sentences",
    "status",
    "ttft_s",
    "tpot_s",
    "gl_s",
    "error",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: malformed: {message}")]
    Malformed { path: String, message: String },
}

impl ReportError {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        ReportError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    fn malformed(path: &Path, e: impl std::fmt::Display) -> Self {
        ReportError::Malformed {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvFingerprint {
    pub hostname: String,
    pub telemetry_provider: String,
    pub clock: String,
    pub harness_version: String,
    pub os: String,
}

impl EnvFingerprint {
    pub fn capture(telemetry_provider: &str) -> Self {
        EnvFingerprint {
            hostname: hostname::get()
                .map(|h| h.to_string_lossy().into_owned())
                .unwrap_or_else(|_| "unknown".to_string()),
            telemetry_provider: telemetry_provider.to_string(),
            clock: "monotonic, seconds since harness start; files use scenario-relative seconds".to_string(),
            harness_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFiles {
    pub records: String,
    pub summary: String,
    pub telemetry: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arrivals: Option<String>,
}

impl Default for ReportFiles {
    fn default() -> Self {
        ReportFiles {
            records: RECORDS_FILE.to_string(),
            summary: SUMMARY_FILE.to_string(),
            telemetry: TELEMETRY_FILE.to_string(),
            arrivals: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub run_id: String,
    pub environment: EnvFingerprint,
    pub config: BenchmarkConfig,
    pub cold_start: Option<ColdStartReport>,
    pub metrics: SystemMetrics,
    pub primary_metric: String,
    pub quality: Vec<QualityScore>,
    /// Clock reading at scenario start; file timestamps are offsets from it.
    pub scenario_start_s: f64,
    pub aborted: bool,
    pub abort_reason: Option<String>,
    pub files: ReportFiles,
    pub warnings: Vec<String>,
    /// Meaning of derived latency figures, as printed in the summary.
    pub definitions: Vec<(String, String)>,
}

pub fn metric_definitions() -> Vec<(String, String)> {
    [
        ("ttft_s", "first token time - dispatch time"),
        ("tpot_s", "(completion - first token) / completion tokens"),
        ("gl_s", "completion - first token"),
        ("queue_s", "dispatch - arrival (harness-side dispatch delay)"),
        ("wait_s", "first token - dispatch (backend scheduling is folded into this, it is not observable from a client)"),
        ("ttft_from_arrival_s", "first token - arrival; QoS TTFT threshold applies to this"),
        ("e2e_s", "completion - arrival; QoS E2E threshold applies to this"),
        ("energy_j", "mean power over the generation window x window length"),
        ("energy_j_integrated", "trapezoidal integral of power samples in the generation window"),
        ("generation_window", "first dispatch to last completion of ok requests"),
        ("model_size_mb", "on-disk weight files, 1 MB = 10^6 bytes; MiB telemetry readings are converted"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

impl RunReport {
    pub fn quality_value(&self) -> Option<f64> {
        self.quality
            .iter()
            .find(|q| q.metric_name == self.primary_metric)
            .map(|q| q.value)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the per-request table.
pub fn write_records_csv(path: &Path, records: &[RequestRecord], origin: f64) -> Result<(), ReportError> {
    let file = std::fs::File::create(path).map_err(|e| ReportError::io(path, e))?;
    let mut raw = std::io::BufWriter::new(file);
    writeln!(raw, "# schema_version={SCHEMA_VERSION}").map_err(|e| ReportError::io(path, e))?;
    let mut w = csv::Writer::from_writer(raw);
    w.write_record(RECORD_COLUMNS).map_err(|e| ReportError::io(path, e))?;
    for r in records {
        let lat = per_request_latency(r);
        let row = [
            r.seq.to_string(),
            r.instance_id.clone(),
            (r.arrival_time - origin).to_string(),
            (r.dispatch_time - origin).to_string(),
            (r.first_token_time - origin).to_string(),
            (r.completion_time - origin).to_string(),
            r.completion_tokens.to_string(),
            r.sentence_count.to_string(),
            r.status.as_str().to_string(),
            opt(lat.map(|l| l.ttft_s)),
            opt(lat.map(|l| l.tpot_s)),
            opt(lat.map(|l| l.gl_s)),
            r.error.clone().unwrap_or_default(),
        ];
        w.write_record(&row).map_err(|e| ReportError::io(path, e))?;
    }
    w.flush().map_err(|e| ReportError::io(path, e))
}

/// One parsed row of the per-request table.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow {
    pub seq: u64,
    pub instance_id: String,
    pub arrival_s: f64,
    pub dispatch_s: f64,
    pub first_token_s: f64,
    pub completion_s: f64,
    pub n_tokens: u64,
    pub n_sentences: u64,
    pub status: RequestStatus,
    pub ttft_s: Option<f64>,
    pub tpot_s: Option<f64>,
    pub gl_s: Option<f64>,
    pub error: String,
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RecordRow>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| ReportError::io(path, e))?;
    let headers = rdr.headers().map_err(|e| ReportError::malformed(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != RECORD_COLUMNS {
        return Err(ReportError::malformed(path, "unexpected header"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ReportError::malformed(path, e))?;
        let err = |what: &str| ReportError::malformed(path, format!("row {}: bad {what}", i + 1));
        let f = |k: usize| rec[k].parse::<f64>().map_err(|_| err(RECORD_COLUMNS[k]));
        let u = |k: usize| rec[k].parse::<u64>().map_err(|_| err(RECORD_COLUMNS[k]));
        let o = |k: usize| -> Result<Option<f64>, ReportError> {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                f(k).map(Some)
            }
        };
        rows.push(RecordRow {
            seq: u(0)?,
            instance_id: rec[1].to_string(),
            arrival_s: f(2)?,
            dispatch_s: f(3)?,
            first_token_s: f(4)?,
            completion_s: f(5)?,
            n_tokens: u(6)?,
            n_sentences: u(7)?,
            status: RequestStatus::parse(&rec[8]).ok_or_else(|| err("status"))?,
            ttft_s: o(9)?,
            tpot_s: o(10)?,
            gl_s: o(11)?,
            error: rec[12].to_string(),
        });
    }
    Ok(rows)
}

fn fmt_stat(s: &Option<AggregateStat>, scale: f64, unit: &str) -> String {
    match s {
        None => "n/a".to_string(),
        Some(a) => {
            let ci = a
                .ci95_half_width
                .map(|c| format!(" ± {:.3}", c * scale))
                .unwrap_or_default();
            format!(
                "{:.3}{ci} {unit} (p50 {:.3}, p95 {:.3}, n={})",
                a.mean * scale,
                a.p50 * scale,
                a.p95 * scale,
                a.n
            )
        }
    }
}

fn fmt_field(s: &Option<FieldStat>, unit: &str) -> String {
    match s {
        None => "n/a".to_string(),
        Some(f) => format!("avg {:.3} / peak {:.3} {unit}", f.mean, f.max),
    }
}

fn fmt_opt(v: Option<f64>, unit: &str) -> String {
    v.map(|x| format!("{x:.6} {unit}")).unwrap_or_else(|| "n/a".to_string())
}

/// Plain-text summary in a metric/value layout.
pub fn render_summary(report: &RunReport) -> String {
    let m = &report.metrics;
    let c = &report.config;
    let mut s = String::new();
    let _ = writeln!(s, "schema_version: {}", report.schema_version);
    let _ = writeln!(s, "run_id: {}", report.run_id);
    let _ = writeln!(
        s,
        "model: {}  backend: {}  quant: {}  task: {}  scenario: {}",
        c.model_id, c.backend, c.quantization, c.task, c.scenario
    );
    if report.aborted {
        let _ = writeln!(s, "ABORTED: {}", report.abort_reason.as_deref().unwrap_or("unknown"));
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<28} {}", "metric", "value");
    let _ = writeln!(s, "{:-<28} {:-<40}", "", "");
    let mut row = |k: &str, v: String| {
        let _ = writeln!(s, "{k:<28} {v}");
    };
    row(
        &report.primary_metric,
        report.quality_value().map(|q| format!("{q:.4}")).unwrap_or_else(|| "n/a".into()),
    );
    for q in report.quality.iter().filter(|q| q.metric_name != report.primary_metric) {
        row(&q.metric_name, format!("{:.4}", q.value));
    }
    row("requests (ok/total)", format!("{}/{}", m.n_ok, m.n_requests));
    row("ttft", fmt_stat(&m.ttft_s, 1000.0, "ms"));
    row("tpot", fmt_stat(&m.tpot_s, 1000.0, "ms"));
    row("gl", fmt_stat(&m.gl_s, 1.0, "s"));
    row("tps", format!("{:.3} tokens/s", m.tps));
    row("sps", format!("{:.3} sentences/s", m.sps));
    row("request throughput", format!("{:.3} req/s", m.request_throughput_rps));
    row("wall time", format!("{:.3} s", m.scenario_wall_time_s));
    row("token counts from", m.token_count_source.clone());
    row("gpu memory", fmt_field(&m.resources.gpu_mem_mb, "MB"));
    row("gpu utilization", fmt_field(&m.resources.gpu_util_pct, "%"));
    row("power", fmt_field(&m.resources.power_w, "W"));
    row("cpu", fmt_field(&m.resources.cpu_pct, "%"));
    row("ram", fmt_field(&m.resources.ram_mb, "MB"));
    row("energy", fmt_opt(m.energy.map(|e| e.energy_wh), "Wh"));
    row("energy/token", fmt_opt(m.energy.and_then(|e| e.energy_per_token_j), "J"));
    row("energy/sentence", fmt_opt(m.energy.and_then(|e| e.energy_per_sentence_j), "J"));
    row("energy (integrated)", fmt_opt(m.energy_j_integrated, "J"));
    row("model size", fmt_opt(m.model_size_mb, "MB"));
    row("memory overhead", fmt_opt(m.overhead_mb, "MB"));
    if let Some(cs) = &report.cold_start {
        row(
            "cold start",
            format!(
                "{:.3} s (startup {:.3} + load {:.3} + ttft {:.3}){}",
                cs.t_cold_s,
                cs.t_startup_s,
                cs.t_load_s,
                cs.probe_ttft_s,
                if cs.attached { " [attached]" } else { "" }
            ),
        );
    }
    let sl = &m.server_latency;
    row("queue", fmt_stat(&sl.queue_s, 1000.0, "ms"));
    row("wait", fmt_stat(&sl.wait_s, 1000.0, "ms"));
    row("ttft from arrival", fmt_stat(&sl.ttft_from_arrival_s, 1.0, "s"));
    row("e2e", fmt_stat(&sl.e2e_s, 1.0, "s"));
    row(
        "qos violations",
        format!(
            "ttft>{}s {:.2}%  e2e>{}s {:.2}%",
            sl.qos.ttft_threshold_s,
            100.0 * sl.qos.ttft_violation_rate,
            sl.qos.e2e_threshold_s,
            100.0 * sl.qos.e2e_violation_rate
        ),
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "definitions:");
    for (k, v) in &report.definitions {
        let _ = writeln!(s, "  {k}: {v}");
    }
    if !report.warnings.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "warnings:");
        for w in &report.warnings {
            let _ = writeln!(s, "  - {w}");
        }
    }
    s
}

/// Writes report.json, records.csv, telemetry.csv and summary.txt into
/// `out_dir`. Returns the written paths.
pub fn emit(
    report: &RunReport,
    records: &[RequestRecord],
    telemetry: &TelemetrySeries,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(out_dir).map_err(|e| ReportError::io(out_dir, e))?;
    let origin = report.scenario_start_s;
    let records_path = out_dir.join(&report.files.records);
    write_records_csv(&records_path, records, origin)?;
    let telemetry_path = out_dir.join(&report.files.telemetry);
    telemetry
        .write_csv(&telemetry_path, origin)
        .map_err(|e| ReportError::io(&telemetry_path, e))?;
    let report_path = out_dir.join(REPORT_FILE);
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&report_path, json).map_err(|e| ReportError::io(&report_path, e))?;
    let summary_path = out_dir.join(&report.files.summary);
    std::fs::write(&summary_path, render_summary(report)).map_err(|e| ReportError::io(&summary_path, e))?;
    Ok(vec![report_path, records_path, telemetry_path, summary_path])
}

/// Reads a report object from a file or from `report.json` in a directory.
pub fn load_report(path: &Path) -> Result<RunReport, ReportError> {
    let file = if path.is_dir() { path.join(REPORT_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| ReportError::io(&file, e))?;
    serde_json::from_str(&text).map_err(|e| ReportError::malformed(&file, e))
}
