//! Benchmark run configuration.
//!
//! A run is described by a YAML document. Parsing happens in two steps: the
//! document is read into a loose [`serde_yaml::Value`] so unknown keys can be
//! reported by name, then deserialized into a raw form with optional fields
//! and validated into a [`BenchmarkConfig`] with every default filled in.
//! Serializing a `BenchmarkConfig` produces a document that parses back to an
//! identical value.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;
use thiserror::Error;

pub const DEFAULT_TELEMETRY_INTERVAL_MS: u64 = 100;
pub const DEFAULT_QOS_TTFT_S: f64 = 2.0;
pub const DEFAULT_QOS_E2E_S: f64 = 6.0;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 512;
pub const DEFAULT_SAMPLES: usize = 64;
pub const DEFAULT_ENDPOINT: &str = "http://127.0.0.1:8000";
pub const DEFAULT_READY_PATH: &str = "/health";
pub const DEFAULT_READY_TIMEOUT_S: f64 = 600.0;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("invalid value for `{field}`: {message}")]
    InvalidValue { field: String, message: String },
    #[error("constraint violated on `{field}`: {invariant}")]
    Constraint { field: String, invariant: String },
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Tgi,
    Vllm,
    Sglang,
    Lmdeploy,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Mmlu,
    Summarization,
    Qa,
    Sql,
    Custom,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TaskKind::Mmlu => "mmlu",
            TaskKind::Summarization => "summarization",
            TaskKind::Qa => "qa",
            TaskKind::Sql => "sql",
            TaskKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Single,
    Batch,
    Server,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::Single => "single",
            Scenario::Batch => "batch",
            Scenario::Server => "server",
        };
        f.write_str(s)
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Backend::Tgi => "tgi",
            Backend::Vllm => "vllm",
            Backend::Sglang => "sglang",
            Backend::Lmdeploy => "lmdeploy",
            Backend::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Quality metric used by the `custom` task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CustomMetric {
    RougeL,
    F1,
    Accuracy,
}

/// How to start a backend process before benchmarking it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaunchSpec {
    pub command: Vec<String>,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
    #[serde(default = "default_ready_path")]
    pub ready_path: String,
    #[serde(default = "default_ready_timeout")]
    pub ready_timeout_s: f64,
}

fn default_ready_path() -> String {
    DEFAULT_READY_PATH.to_string()
}

fn default_ready_timeout() -> f64 {
    DEFAULT_READY_TIMEOUT_S
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Null,
    /// Arbitrary command printing `mem,util,power` CSV.
    Command,
    /// `nvidia-smi` in CSV query mode (memory in MiB).
    NvidiaSmi,
    /// Replays a recorded trace file.
    Replay,
}

/// Unit of the memory column a provider reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MemUnit {
    #[default]
    Mb,
    Mib,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetrySpec {
    #[serde(default)]
    pub provider: ProviderKind,
    #[serde(default = "default_interval_ms")]
    pub interval_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mem_unit: Option<MemUnit>,
}

fn default_interval_ms() -> u64 {
    DEFAULT_TELEMETRY_INTERVAL_MS
}

impl Default for TelemetrySpec {
    fn default() -> Self {
        TelemetrySpec {
            provider: ProviderKind::Null,
            interval_ms: DEFAULT_TELEMETRY_INTERVAL_MS,
            command: None,
            trace_path: None,
            mem_unit: None,
        }
    }
}

impl TelemetrySpec {
    pub fn interval_s(&self) -> f64 {
        self.interval_ms as f64 / 1000.0
    }
}

/// A validated benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub model_id: String,
    pub backend: Backend,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend_launch: Option<LaunchSpec>,
    pub endpoint_url: String,
    pub quantization: String,
    pub task: TaskKind,
    pub dataset_path: PathBuf,
    pub scenario: Scenario,
    pub samples: usize,
    pub batch_size: usize,
    pub run_time_s: u64,
    pub concurrent_users: usize,
    pub requests_per_user_per_min: f64,
    pub max_output_tokens: u32,
    pub telemetry: TelemetrySpec,
    pub seed: u64,
    pub qos_ttft_s: f64,
    pub qos_e2e_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_template: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    pub model_files_glob: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom_metric: Option<CustomMetric>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(alias = "hf_model")]
    model_id: Option<String>,
    backend: Option<Backend>,
    backend_launch: Option<LaunchSpec>,
    endpoint_url: Option<String>,
    quantization: Option<String>,
    task: Option<TaskKind>,
    dataset_path: Option<PathBuf>,
    scenario: Option<Scenario>,
    samples: Option<i64>,
    batch_size: Option<i64>,
    run_time_s: Option<i64>,
    concurrent_users: Option<i64>,
    requests_per_user_per_min: Option<f64>,
    max_output_tokens: Option<i64>,
    telemetry: Option<TelemetrySpec>,
    seed: Option<u64>,
    qos_ttft_s: Option<f64>,
    qos_e2e_s: Option<f64>,
    run_id: Option<String>,
    prompt_template: Option<PathBuf>,
    model_path: Option<PathBuf>,
    model_files_glob: Option<String>,
    custom_metric: Option<CustomMetric>,
}

/// Every key accepted at the top level of a config document.
pub const KNOWN_KEYS: &[&str] = &[
    "model_id",
    "hf_model",
    "backend",
    "backend_launch",
    "endpoint_url",
    "quantization",
    "task",
    "dataset_path",
    "scenario",
    "samples",
    "batch_size",
    "run_time_s",
    "concurrent_users",
    "requests_per_user_per_min",
    "max_output_tokens",
    "telemetry",
    "seed",
    "qos_ttft_s",
    "qos_e2e_s",
    "run_id",
    "prompt_template",
    "model_path",
    "model_files_glob",
    "custom_metric",
];

fn syntax_error(err: &serde_yaml::Error) -> ConfigError {
    let (line, column) = err
        .location()
        .map(|l| (l.line(), l.column()))
        .unwrap_or((0, 0));
    ConfigError::Syntax {
        line,
        column,
        message: err.to_string(),
    }
}

fn constraint(field: &str, invariant: impl Into<String>) -> ConfigError {
    ConfigError::Constraint {
        field: field.to_string(),
        invariant: invariant.into(),
    }
}

/// Parses a YAML document into a value, rejecting unknown top-level keys.
pub fn parse_document(text: &str) -> Result<Value, ConfigError> {
    let value: Value = serde_yaml::from_str(text).map_err(|e| syntax_error(&e))?;
    let map = match &value {
        Value::Mapping(m) => m,
        Value::Null => {
            return Err(constraint("model_id", "document is empty"));
        }
        _ => {
            return Err(ConfigError::Syntax {
                line: 1,
                column: 1,
                message: "top level must be a mapping".to_string(),
            })
        }
    };
    for key in map.keys() {
        let name = match key {
            Value::String(s) => s.clone(),
            other => serde_yaml::to_string(other)
                .unwrap_or_default()
                .trim()
                .to_string(),
        };
        if !KNOWN_KEYS.contains(&name.as_str()) {
            return Err(ConfigError::UnknownField(name));
        }
    }
    Ok(value)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<BenchmarkConfig, ConfigError> {
    let value = parse_document(text)?;
    from_value(value)
}

/// Validates an already-parsed document (used after applying overrides).
pub fn from_value(value: Value) -> Result<BenchmarkConfig, ConfigError> {
    let raw: RawConfig = serde_yaml::from_value(value).map_err(map_deser_error)?;
    validate(raw)
}

pub fn load_config(path: &std::path::Path) -> Result<BenchmarkConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

fn map_deser_error(err: serde_yaml::Error) -> ConfigError {
    let msg = err.to_string();
    if let Some(rest) = msg.split("unknown field `").nth(1) {
        if let Some(name) = rest.split('`').next() {
            return ConfigError::UnknownField(name.to_string());
        }
    }
    let field = msg
        .split_once(':')
        .map(|(head, _)| head.trim().to_string())
        .filter(|h| !h.contains(' '))
        .unwrap_or_else(|| "document".to_string());
    ConfigError::InvalidValue {
        field,
        message: msg,
    }
}

fn positive(field: &str, value: Option<i64>, default: Option<i64>) -> Result<u64, ConfigError> {
    match value.or(default) {
        None => Err(constraint(field, format!("{field} is required"))),
        Some(v) if v < 1 => Err(constraint(field, format!("{field} must be >= 1 (got {v})"))),
        Some(v) => Ok(v as u64),
    }
}

fn validate(raw: RawConfig) -> Result<BenchmarkConfig, ConfigError> {
    let model_id = raw
        .model_id
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| constraint("model_id", "model_id (hf_model) is required"))?;
    let task = raw
        .task
        .ok_or_else(|| constraint("task", "task is required"))?;
    let dataset_path = raw
        .dataset_path
        .ok_or_else(|| constraint("dataset_path", "dataset_path is required"))?;
    let scenario = raw
        .scenario
        .ok_or_else(|| constraint("scenario", "scenario is required"))?;

    if let Some(launch) = &raw.backend_launch {
        if launch.command.is_empty() || launch.command[0].trim().is_empty() {
            return Err(constraint("backend_launch.command", "command must be non-empty"));
        }
        if !(launch.ready_timeout_s > 0.0) {
            return Err(constraint(
                "backend_launch.ready_timeout_s",
                "ready_timeout_s must be > 0",
            ));
        }
        if !launch.ready_path.starts_with('/') {
            return Err(constraint("backend_launch.ready_path", "ready_path must start with '/'"));
        }
    }
    let endpoint_url = match (raw.endpoint_url, &raw.backend_launch) {
        (Some(url), _) => url,
        (None, Some(_)) => DEFAULT_ENDPOINT.to_string(),
        (None, None) => {
            return Err(constraint(
                "endpoint_url",
                "endpoint_url is required when backend_launch is absent",
            ))
        }
    };
    if !(endpoint_url.starts_with("http://") || endpoint_url.starts_with("https://")) {
        return Err(constraint("endpoint_url", "endpoint_url must be an http(s) URL"));
    }
    let endpoint_url = endpoint_url.trim_end_matches('/').to_string();

    let samples = positive("samples", raw.samples, Some(DEFAULT_SAMPLES as i64))? as usize;
    let batch_default = if scenario == Scenario::Batch { None } else { Some(1) };
    let batch_size = positive("batch_size", raw.batch_size, batch_default)? as usize;
    if scenario == Scenario::Batch && samples < batch_size {
        return Err(constraint(
            "batch_size",
            format!("samples ({samples}) must be >= batch_size ({batch_size})"),
        ));
    }

    let server = scenario == Scenario::Server;
    let run_time_s = positive("run_time_s", raw.run_time_s, (!server).then_some(1))?;
    let concurrent_users = positive("concurrent_users", raw.concurrent_users, Some(1))? as usize;
    let rate = match raw.requests_per_user_per_min {
        Some(r) if !(r > 0.0) || !r.is_finite() => {
            return Err(constraint(
                "requests_per_user_per_min",
                format!("requests_per_user_per_min must be > 0 (got {r})"),
            ))
        }
        Some(r) => r,
        None if server => {
            return Err(constraint(
                "requests_per_user_per_min",
                "requests_per_user_per_min is required for scenario=server",
            ))
        }
        None => 1.0,
    };
    let max_output_tokens = positive(
        "max_output_tokens",
        raw.max_output_tokens,
        Some(DEFAULT_MAX_OUTPUT_TOKENS as i64),
    )?;
    if max_output_tokens > u32::MAX as u64 {
        return Err(constraint("max_output_tokens", "max_output_tokens too large"));
    }

    let telemetry = raw.telemetry.unwrap_or_default();
    if telemetry.interval_ms == 0 {
        return Err(constraint("telemetry.interval_ms", "interval_ms must be >= 1"));
    }
    match telemetry.provider {
        ProviderKind::Command if telemetry.command.is_none() => {
            return Err(constraint(
                "telemetry.command",
                "command provider requires telemetry.command",
            ))
        }
        ProviderKind::Replay if telemetry.trace_path.is_none() => {
            return Err(constraint(
                "telemetry.trace_path",
                "replay provider requires telemetry.trace_path",
            ))
        }
        _ => {}
    }

    let qos_ttft_s = raw.qos_ttft_s.unwrap_or(DEFAULT_QOS_TTFT_S);
    let qos_e2e_s = raw.qos_e2e_s.unwrap_or(DEFAULT_QOS_E2E_S);
    for (field, v) in [("qos_ttft_s", qos_ttft_s), ("qos_e2e_s", qos_e2e_s)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(constraint(field, format!("{field} must be a finite value >= 0")));
        }
    }

    Ok(BenchmarkConfig {
        model_id,
        backend: raw.backend.unwrap_or(Backend::Custom),
        backend_launch: raw.backend_launch,
        endpoint_url,
        quantization: raw.quantization.unwrap_or_else(|| "fp16".to_string()),
        task,
        dataset_path,
        scenario,
        samples,
        batch_size,
        run_time_s,
        concurrent_users,
        requests_per_user_per_min: rate,
        max_output_tokens: max_output_tokens as u32,
        telemetry,
        seed: raw.seed.unwrap_or(0),
        qos_ttft_s,
        qos_e2e_s,
        run_id: raw.run_id,
        prompt_template: raw.prompt_template,
        model_path: raw.model_path,
        model_files_glob: raw.model_files_glob.unwrap_or_else(|| "*".to_string()),
        custom_metric: raw.custom_metric,
    })
}

/// Applies a dotted-key override such as `telemetry.interval_ms=50`.
///
/// The right-hand side is parsed as a YAML scalar so numbers and booleans
/// keep their type.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw_value) = assignment.split_once('=').ok_or_else(|| ConfigError::InvalidValue {
        field: assignment.to_string(),
        message: "override must look like key=value".to_string(),
    })?;
    let value: Value = serde_yaml::from_str(raw_value).map_err(|e| syntax_error(&e))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::InvalidValue {
            field: key.to_string(),
            message: "empty key segment".to_string(),
        });
    }
    if !KNOWN_KEYS.contains(&parts[0]) {
        return Err(ConfigError::UnknownField(parts[0].to_string()));
    }
    let mut cursor = doc;
    for part in &parts[..parts.len() - 1] {
        if !cursor.is_mapping() {
            *cursor = Value::Mapping(Default::default());
        }
        let map = cursor.as_mapping_mut().expect("mapping");
        cursor = map
            .entry(Value::String(part.to_string()))
            .or_insert_with(|| Value::Mapping(Default::default()));
    }
    if !cursor.is_mapping() {
        *cursor = Value::Mapping(Default::default());
    }
    cursor
        .as_mapping_mut()
        .expect("mapping")
        .insert(Value::String(parts[parts.len() - 1].to_string()), value);
    Ok(())
}

impl BenchmarkConfig {
    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes")
    }

    /// Identifier used in reports and comparisons.
    pub fn effective_run_id(&self) -> String {
        if let Some(id) = &self.run_id {
            return id.clone();
        }
        let model = self
            .model_id
            .rsplit('/')
            .next()
            .unwrap_or(&self.model_id)
            .to_string();
        let raw = format!(
            "{}-{}-{}-{}-{}",
            model, self.backend, self.quantization, self.task, self.scenario
        );
        raw.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' || c == '_' { c } else { '_' })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
hf_model: org/model
task: mmlu
dataset_path: data/mmlu.jsonl
scenario: single
samples: 64
endpoint_url: http://localhost:8000
";

    #[test]
    fn minimal_document_applies_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.model_id, "org/model");
        assert_eq!(cfg.samples, 64);
        assert_eq!(cfg.scenario, Scenario::Single);
        assert_eq!(cfg.telemetry.interval_ms, 100);
        assert_eq!(cfg.qos_ttft_s, 2.0);
        assert_eq!(cfg.qos_e2e_s, 6.0);
        assert_eq!(cfg.max_output_tokens, 512);
        assert_eq!(cfg.batch_size, 1);
    }

    #[test]
    fn server_scenario_from_concurrency_study() {
        let doc = "
model_id: m
task: qa
dataset_path: d.jsonl
scenario: server
endpoint_url: http://localhost:8000
concurrent_users: 32
requests_per_user_per_min: 12
run_time_s: 600
";
        let cfg = parse_config(doc).unwrap();
        assert_eq!(cfg.concurrent_users, 32);
        assert_eq!(cfg.requests_per_user_per_min, 12.0);
        assert_eq!(cfg.run_time_s, 600);
    }

    #[test]
    fn zero_batch_size_rejected() {
        let doc = format!("{MINIMAL}\n").replace("scenario: single", "scenario: batch") + "batch_size: 0\n";
        match parse_config(&doc) {
            Err(ConfigError::Constraint { field, .. }) => assert_eq!(field, "batch_size"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn batch_needs_enough_samples() {
        let doc = MINIMAL.replace("scenario: single", "scenario: batch") + "batch_size: 128\n";
        assert!(matches!(
            parse_config(&doc),
            Err(ConfigError::Constraint { field, .. }) if field == "batch_size"
        ));
    }

    #[test]
    fn unknown_key_is_named() {
        let doc = format!("{MINIMAL}samplez: 3\n");
        assert_eq!(
            parse_config(&doc),
            Err(ConfigError::UnknownField("samplez".to_string()))
        );
    }

    #[test]
    fn unknown_nested_key_is_named() {
        let doc = format!("{MINIMAL}telemetry:\n  intervall_ms: 5\n");
        assert_eq!(
            parse_config(&doc),
            Err(ConfigError::UnknownField("intervall_ms".to_string()))
        );
    }

    #[test]
    fn server_requires_run_time() {
        let doc = MINIMAL.replace("scenario: single", "scenario: server")
            + "requests_per_user_per_min: 12\n";
        assert!(matches!(
            parse_config(&doc),
            Err(ConfigError::Constraint { field, .. }) if field == "run_time_s"
        ));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_config("model_id: [unclosed\ntask: mmlu\n").unwrap_err();
        match err {
            ConfigError::Syntax { line, .. } => assert!(line >= 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn endpoint_required_without_launch() {
        let doc = MINIMAL.replace("endpoint_url: http://localhost:8000\n", "");
        assert!(matches!(
            parse_config(&doc),
            Err(ConfigError::Constraint { field, .. }) if field == "endpoint_url"
        ));
        let doc = doc + "backend_launch:\n  command: [\"./serve\"]\n";
        let cfg = parse_config(&doc).unwrap();
        assert_eq!(cfg.endpoint_url, DEFAULT_ENDPOINT);
        assert_eq!(cfg.backend_launch.unwrap().ready_path, "/health");
    }

    #[test]
    fn empty_launch_command_rejected() {
        let doc = format!("{MINIMAL}backend_launch:\n  command: []\n");
        assert!(matches!(
            parse_config(&doc),
            Err(ConfigError::Constraint { field, .. }) if field == "backend_launch.command"
        ));
    }

    #[test]
    fn every_table_field_accepted() {
        let doc = "
hf_model: google/gemma-2-9b-it
backend: vllm
quantization: awq
task: summarization
scenario: server
samples: 128
batch_size: 16
run_time_s: 300
concurrent_users: 8
requests_per_user_per_min: 16
dataset_path: x.jsonl
endpoint_url: http://h:1
";
        let cfg = parse_config(doc).unwrap();
        assert_eq!(cfg.backend, Backend::Vllm);
        assert_eq!(cfg.quantization, "awq");
    }

    #[test]
    fn override_nested_key() {
        let mut doc = parse_document(MINIMAL).unwrap();
        apply_override(&mut doc, "telemetry.interval_ms=50").unwrap();
        apply_override(&mut doc, "samples=8").unwrap();
        let cfg = from_value(doc).unwrap();
        assert_eq!(cfg.telemetry.interval_ms, 50);
        assert_eq!(cfg.samples, 8);
        let mut doc = parse_document(MINIMAL).unwrap();
        assert!(matches!(
            apply_override(&mut doc, "nope=1"),
            Err(ConfigError::UnknownField(_))
        ));
    }

    #[test]
    fn run_id_is_filesystem_safe() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.effective_run_id(), "model-custom-fp16-mmlu-single");
    }
}
