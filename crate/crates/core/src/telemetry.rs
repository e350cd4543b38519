//! Resource sampling during a scenario.
//!
//! A [`Sampler`] polls a [`TelemetryProvider`] on a background thread at a
//! fixed interval and timestamps each reading on the process clock. GPU
//! readings come from the provider; CPU and RAM come from the launched
//! backend's process tree when there is one. Fields a source cannot supply
//! are `None` (invalid) rather than zero.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock;
use crate::config::{MemUnit, ProviderKind, TelemetrySpec};

/// Bytes per MiB over bytes per MB.
pub const MIB_TO_MB: f64 = 1.048_576;

pub const NVIDIA_SMI_COMMAND: &str =
    "nvidia-smi --query-gpu=memory.used,utilization.gpu,power.draw --format=csv,noheader,nounits";

pub const TRACE_HEADER: [&str; 6] = ["t_s", "mem_mb", "util_pct", "power_w", "cpu_pct", "ram_mb"];

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("trace {path}: {message}")]
    Trace { path: String, message: String },
    #[error("provider: {0}")]
    Provider(String),
}

/// One provider reading. `None` marks an invalid or unavailable field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Reading {
    pub gpu_mem_mb: Option<f64>,
    pub gpu_util_pct: Option<f64>,
    pub power_w: Option<f64>,
    pub cpu_pct: Option<f64>,
    pub ram_mb: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub t: f64,
    pub gpu_mem_mb: Option<f64>,
    pub gpu_util_pct: Option<f64>,
    pub power_w: Option<f64>,
    pub cpu_pct: Option<f64>,
    pub ram_mb: Option<f64>,
}

impl TelemetrySample {
    pub fn from_reading(t: f64, r: Reading) -> Self {
        let valid = |v: Option<f64>| v.filter(|x| x.is_finite() && *x >= 0.0);
        TelemetrySample {
            t,
            gpu_mem_mb: valid(r.gpu_mem_mb),
            gpu_util_pct: valid(r.gpu_util_pct).filter(|u| *u <= 100.0),
            power_w: valid(r.power_w),
            cpu_pct: valid(r.cpu_pct),
            ram_mb: valid(r.ram_mb),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySeries {
    pub samples: Vec<TelemetrySample>,
    pub interval_s: f64,
    pub provider: String,
}

impl TelemetrySeries {
    pub fn empty(provider: &str, interval_s: f64) -> Self {
        TelemetrySeries {
            samples: Vec::new(),
            interval_s,
            provider: provider.to_string(),
        }
    }

    /// Samples with `t0 <= t <= t1` (closed on both ends).
    pub fn window(&self, t0: f64, t1: f64) -> TelemetrySeries {
        TelemetrySeries {
            samples: self
                .samples
                .iter()
                .filter(|s| s.t >= t0 && s.t <= t1)
                .copied()
                .collect(),
            interval_s: self.interval_s,
            provider: self.provider.clone(),
        }
    }

    /// Writes the series in trace format, with timestamps shifted by
    /// `-origin`. Invalid fields are left empty.
    pub fn write_csv(&self, path: &Path, origin: f64) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{}", TRACE_HEADER.join(","))?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.t - origin,
                cell(s.gpu_mem_mb),
                cell(s.gpu_util_pct),
                cell(s.power_w),
                cell(s.cpu_pct),
                cell(s.ram_mb)
            )?;
        }
        w.flush()
    }

    /// Reads a trace file. Timestamps are shifted by `+origin`.
    pub fn read_csv(path: &Path, origin: f64, provider: &str, interval_s: f64) -> Result<Self, TelemetryError> {
        let rows = read_trace(path)?;
        Ok(TelemetrySeries {
            samples: rows
                .into_iter()
                .map(|(t, r)| TelemetrySample::from_reading(t + origin, r))
                .collect(),
            interval_s,
            provider: provider.to_string(),
        })
    }
}

/// `window` as a free function.
pub fn window(series: &TelemetrySeries, t0: f64, t1: f64) -> TelemetrySeries {
    series.window(t0, t1)
}

pub trait TelemetryProvider: Send {
    fn label(&self) -> String;
    /// Takes one reading; `None` means the provider has nothing more to
    /// give (used by trace replay) and sampling stops.
    fn sample(&mut self) -> Option<Reading>;
}

/// Supplies no readings; every field is invalid.
pub struct NullProvider;

impl TelemetryProvider for NullProvider {
    fn label(&self) -> String {
        "null".to_string()
    }

    fn sample(&mut self) -> Option<Reading> {
        Some(Reading::default())
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    s.parse::<f64>().ok()
}

/// Parses the `mem,util,power` line printed by a command provider.
pub fn parse_gpu_csv(line: &str, unit: MemUnit) -> Reading {
    let cells: Vec<&str> = line.trim().split(',').collect();
    let get = |i: usize| cells.get(i).and_then(|c| parse_cell(c));
    let mem = get(0).map(|m| match unit {
        MemUnit::Mb => m,
        MemUnit::Mib => m * MIB_TO_MB,
    });
    Reading {
        gpu_mem_mb: mem,
        gpu_util_pct: get(1),
        power_w: get(2),
        cpu_pct: None,
        ram_mb: None,
    }
}

/// Runs a shell command per sample and parses its first output line.
///
/// The `nvidia-smi` preset forwards `utilization.gpu`, the fraction of time
/// a kernel was running (not memory-controller utilization).
pub struct CommandProvider {
    command: String,
    unit: MemUnit,
}

impl CommandProvider {
    pub fn new(command: impl Into<String>, unit: MemUnit) -> Self {
        CommandProvider {
            command: command.into(),
            unit,
        }
    }

    pub fn nvidia_smi() -> Self {
        Self::new(NVIDIA_SMI_COMMAND, MemUnit::Mib)
    }
}

impl TelemetryProvider for CommandProvider {
    fn label(&self) -> String {
        format!("command:{}", self.command)
    }

    fn sample(&mut self) -> Option<Reading> {
        let out = Command::new("sh").arg("-c").arg(&self.command).output();
        Some(match out {
            Ok(o) if o.status.success() => {
                let text = String::from_utf8_lossy(&o.stdout);
                text.lines()
                    .find(|l| !l.trim().is_empty())
                    .map(|l| parse_gpu_csv(l, self.unit))
                    .unwrap_or_default()
            }
            _ => Reading::default(),
        })
    }
}

fn read_trace(path: &Path) -> Result<Vec<(f64, Reading)>, TelemetryError> {
    let err = |message: String| TelemetryError::Trace {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(err(format!(
            "header must be {}, found {}",
            TRACE_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let get = |c: usize| rec.get(c).and_then(parse_cell);
        let t = get(0).ok_or_else(|| err(format!("row {}: missing t_s", i + 2)))?;
        rows.push((
            t,
            Reading {
                gpu_mem_mb: get(1),
                gpu_util_pct: get(2),
                power_w: get(3),
                cpu_pct: get(4),
                ram_mb: get(5),
            },
        ));
    }
    Ok(rows)
}

/// Replays a recorded trace one row per sample.
pub struct ReplayProvider {
    rows: Vec<(f64, Reading)>,
    next: usize,
}

impl ReplayProvider {
    pub fn from_file(path: &Path) -> Result<Self, TelemetryError> {
        Ok(ReplayProvider {
            rows: read_trace(path)?,
            next: 0,
        })
    }

    pub fn from_readings(readings: Vec<Reading>) -> Self {
        ReplayProvider {
            rows: readings.into_iter().map(|r| (0.0, r)).collect(),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The trace as a series on its own timestamps, shifted by `origin`.
    pub fn to_series(&self, origin: f64, interval_s: f64) -> TelemetrySeries {
        TelemetrySeries {
            samples: self
                .rows
                .iter()
                .map(|(t, r)| TelemetrySample::from_reading(origin + t, *r))
                .collect(),
            interval_s,
            provider: "replay".to_string(),
        }
    }
}

impl TelemetryProvider for ReplayProvider {
    fn label(&self) -> String {
        "replay".to_string()
    }

    fn sample(&mut self) -> Option<Reading> {
        let row = self.rows.get(self.next)?;
        self.next += 1;
        Some(row.1)
    }
}

/// CPU and RSS of a process and all of its descendants, read from `/proc`.
pub struct ProcessTreeMonitor {
    root: u32,
    last: Option<(Instant, u64)>,
    ticks_per_s: f64,
    page_size: f64,
}

impl ProcessTreeMonitor {
    pub fn new(root: u32) -> Self {
        // SAFETY: sysconf has no preconditions.
        let (ticks, page) = unsafe { (libc::sysconf(libc::_SC_CLK_TCK), libc::sysconf(libc::_SC_PAGESIZE)) };
        ProcessTreeMonitor {
            root,
            last: None,
            ticks_per_s: if ticks > 0 { ticks as f64 } else { 100.0 },
            page_size: if page > 0 { page as f64 } else { 4096.0 },
        }
    }

    fn tree(&self) -> Vec<u32> {
        let mut parents: Vec<(u32, u32)> = Vec::new();
        if let Ok(dir) = std::fs::read_dir("/proc") {
            for entry in dir.flatten() {
                let Ok(pid) = entry.file_name().to_string_lossy().parse::<u32>() else {
                    continue;
                };
                if let Some(ppid) = read_stat(pid).map(|s| s.ppid) {
                    parents.push((pid, ppid));
                }
            }
        }
        let mut tree = vec![self.root];
        let mut i = 0;
        while i < tree.len() {
            let p = tree[i];
            tree.extend(parents.iter().filter(|(_, pp)| *pp == p).map(|(c, _)| *c));
            i += 1;
        }
        tree
    }

    /// Returns `(cpu_pct, ram_mb)`. CPU needs two samples, so the first call
    /// yields no CPU figure.
    pub fn sample(&mut self) -> (Option<f64>, Option<f64>) {
        let pids = self.tree();
        let stats: Vec<ProcStat> = pids.iter().filter_map(|&p| read_stat(p)).collect();
        if stats.is_empty() {
            return (None, None);
        }
        let ticks: u64 = stats.iter().map(|s| s.utime + s.stime).sum();
        let rss_pages: u64 = stats.iter().map(|s| s.rss_pages).sum();
        let now = Instant::now();
        let cpu = self.last.and_then(|(t, prev)| {
            let dt = now.duration_since(t).as_secs_f64();
            (dt > 0.0).then(|| (ticks.saturating_sub(prev) as f64 / self.ticks_per_s) / dt * 100.0)
        });
        self.last = Some((now, ticks));
        (cpu, Some(rss_pages as f64 * self.page_size / 1e6))
    }
}

struct ProcStat {
    ppid: u32,
    utime: u64,
    stime: u64,
    rss_pages: u64,
}

fn read_stat(pid: u32) -> Option<ProcStat> {
    let text = std::fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
    // The command name may contain spaces; fields resume after the last ')'.
    let rest = &text[text.rfind(')')? + 2..];
    let fields: Vec<&str> = rest.split_whitespace().collect();
    // Indices relative to field 3 (state).
    Some(ProcStat {
        ppid: fields.get(1)?.parse().ok()?,
        utime: fields.get(11)?.parse().ok()?,
        stime: fields.get(12)?.parse().ok()?,
        rss_pages: fields.get(21)?.parse().ok()?,
    })
}

/// Builds the provider named in a telemetry spec.
pub fn provider_from_spec(spec: &TelemetrySpec) -> Result<Box<dyn TelemetryProvider>, TelemetryError> {
    Ok(match spec.provider {
        ProviderKind::Null => Box::new(NullProvider),
        ProviderKind::NvidiaSmi => {
            let mut p = CommandProvider::nvidia_smi();
            if let Some(cmd) = &spec.command {
                p.command = cmd.clone();
            }
            if let Some(unit) = spec.mem_unit {
                p.unit = unit;
            }
            Box::new(p)
        }
        ProviderKind::Command => {
            let cmd = spec
                .command
                .clone()
                .ok_or_else(|| TelemetryError::Provider("command provider needs a command".to_string()))?;
            Box::new(CommandProvider::new(cmd, spec.mem_unit.unwrap_or_default()))
        }
        ProviderKind::Replay => {
            let path = spec
                .trace_path
                .as_ref()
                .ok_or_else(|| TelemetryError::Provider("replay provider needs trace_path".to_string()))?;
            Box::new(ReplayProvider::from_file(path)?)
        }
    })
}

/// Background sampler. `stop` is idempotent.
pub struct Sampler {
    stop: Arc<AtomicBool>,
    samples: Arc<Mutex<Vec<TelemetrySample>>>,
    handle: Option<JoinHandle<()>>,
    interval_s: f64,
    label: String,
}

impl Sampler {
    pub fn samples_so_far(&self) -> Vec<TelemetrySample> {
        self.samples.lock().unwrap().clone()
    }

    pub fn stop(&mut self) -> TelemetrySeries {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
        TelemetrySeries {
            samples: self.samples_so_far(),
            interval_s: self.interval_s,
            provider: self.label.clone(),
        }
    }
}

impl Drop for Sampler {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

/// Starts sampling `provider` every `interval_s`. When `process` is given,
/// CPU and RAM of that process tree fill fields the provider left empty.
pub fn start_sampler(
    mut provider: Box<dyn TelemetryProvider>,
    interval_s: f64,
    process: Option<u32>,
) -> Sampler {
    let stop = Arc::new(AtomicBool::new(false));
    let samples = Arc::new(Mutex::new(Vec::new()));
    let label = provider.label();
    let interval = Duration::from_secs_f64(interval_s);
    let thread_stop = stop.clone();
    let thread_samples = samples.clone();
    let handle = std::thread::Builder::new()
        .name("telemetry".to_string())
        .spawn(move || {
            let mut monitor = process.map(ProcessTreeMonitor::new);
            let start = Instant::now();
            let mut k: u32 = 0;
            let mut last_t = f64::NEG_INFINITY;
            while !thread_stop.load(Ordering::SeqCst) {
                let due = start + interval * k;
                let now = Instant::now();
                if due > now {
                    // Short sleeps keep stop() responsive.
                    std::thread::sleep((due - now).min(Duration::from_millis(20)));
                    continue;
                }
                let t = clock::now();
                let Some(mut reading) = provider.sample() else {
                    break;
                };
                if let Some(m) = monitor.as_mut() {
                    let (cpu, ram) = m.sample();
                    reading.cpu_pct = reading.cpu_pct.or(cpu);
                    reading.ram_mb = reading.ram_mb.or(ram);
                }
                if t > last_t {
                    thread_samples
                        .lock()
                        .unwrap()
                        .push(TelemetrySample::from_reading(t, reading));
                    last_t = t;
                }
                k += 1;
                // Skip deadlines already missed by a slow provider.
                let behind = (Instant::now().duration_since(start).as_secs_f64() / interval_s) as u32;
                if behind > k {
                    k = behind;
                }
            }
        })
        .expect("spawn telemetry thread");
    Sampler {
        stop,
        samples,
        handle: Some(handle),
        interval_s,
        label,
    }
}
