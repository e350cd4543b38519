//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 run error, 2 configuration error, 3 QoS failure
//! (only with `--fail-on-qos`).

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::backend::{attach_and_probe, launch_and_probe, ClientParams, OpenAiClient};
use crate::clock;
use crate::config::{self, BenchmarkConfig, ConfigError, Scenario};
use crate::metrics::{compute_system_metrics, model_size, MetricInputs};
use crate::mockserver::{self, MockProfile};
use crate::report::{self, EnvFingerprint, ReportFiles, RunReport, SCHEMA_VERSION};
use crate::task;
use crate::telemetry::{provider_from_spec, start_sampler, TelemetrySeries};
use crate::workload::{self, ScenarioOutcome};

/// Readiness budget when attaching to an endpoint that is already running.
pub const ATTACH_READY_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    RunError = 1,
    ConfigError = 2,
    QosFailure = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Parser)]
#[command(name = "infer-bench", version, about = "Benchmark OpenAI-compatible inference endpoints")]
pub struct Cli {
    /// Output directory for reports.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Exit with status 3 when any QoS threshold is violated.
    #[arg(long, global = true)]
    pub fail_on_qos: bool,
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one benchmark cell described by a config file.
    Run(RunArgs),
    /// Serve the mock backend.
    MockServe {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 8000)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Validate a config and print it normalized.
    Validate(RunArgs),
    /// Compare variant reports against a base report.
    Compare {
        base: PathBuf,
        #[arg(required = true)]
        variants: Vec<PathBuf>,
    },
    /// Recompute every aggregate of an emitted report from its raw files.
    Recompute { report_dir: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Dotted-key override, e.g. `--set telemetry.interval_ms=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Run(String),
}

impl RunError {
    fn run(e: impl std::fmt::Display) -> Self {
        RunError::Run(e.to_string())
    }

    pub fn exit_status(&self) -> ExitStatus {
        match self {
            RunError::Config(_) => ExitStatus::ConfigError,
            RunError::Run(_) => ExitStatus::RunError,
        }
    }
}

/// Loads a config file, applies overrides and an optional seed, and resolves
/// relative paths against the config file's directory.
pub fn load_with_overrides(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<BenchmarkConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut doc = config::parse_document(&text)?;
    for o in overrides {
        config::apply_override(&mut doc, o)?;
    }
    if let Some(seed) = seed {
        config::apply_override(&mut doc, &format!("seed={seed}"))?;
    }
    let mut cfg = config::from_value(doc)?;
    resolve_paths(&mut cfg, path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

fn resolve_paths(cfg: &mut BenchmarkConfig, base: &Path) {
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    fix(&mut cfg.dataset_path);
    if let Some(p) = cfg.prompt_template.as_mut() {
        fix(p);
    }
    if let Some(p) = cfg.model_path.as_mut() {
        fix(p);
    }
    if let Some(p) = cfg.telemetry.trace_path.as_mut() {
        fix(p);
    }
}

/// Where a finished run went and what it measured.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub dir: PathBuf,
    pub aborted: bool,
}

impl RunOutcome {
    pub fn qos_violated(&self) -> bool {
        let q = &self.report.metrics.server_latency.qos;
        q.ttft_violation_rate > 0.0 || q.e2e_violation_rate > 0.0
    }
}

async fn run_scenario(
    cfg: &BenchmarkConfig,
    instances: &[task::TaskInstance],
    client: Arc<OpenAiClient>,
    dir: &Path,
) -> Result<(ScenarioOutcome, Option<String>), RunError> {
    Ok(match cfg.scenario {
        Scenario::Single => (workload::run_single_stream(instances, client).await, None),
        Scenario::Batch => (workload::run_batch(instances, cfg.batch_size, client).await, None),
        Scenario::Server => {
            let plan = workload::plan_arrivals(
                cfg.concurrent_users,
                cfg.requests_per_user_per_min,
                cfg.run_time_s as f64,
                cfg.seed,
            );
            let path = dir.join(report::ARRIVALS_FILE);
            plan.write_to(&path).map_err(|e| RunError::run(format!("{}: {e}", path.display())))?;
            (
                workload::run_server(instances, &plan, client).await,
                Some(report::ARRIVALS_FILE.to_string()),
            )
        }
    })
}

/// The full pipeline: prompts, launch or attach, probe, scenario, teardown,
/// scoring and emission. Partial results are emitted when the scenario
/// aborts.
pub async fn execute_run(cfg: BenchmarkConfig, out_root: &Path) -> Result<RunOutcome, RunError> {
    let run_id = cfg.effective_run_id();
    let dir = out_root.join(&run_id);
    std::fs::create_dir_all(&dir).map_err(|e| RunError::run(format!("{}: {e}", dir.display())))?;
    let mut warnings = Vec::new();

    let plugin = task::for_kind(cfg.task, cfg.prompt_template.as_deref(), cfg.custom_metric).map_err(RunError::run)?;
    let prompts = plugin
        .generate_prompts(&cfg.dataset_path, cfg.samples, cfg.seed)
        .map_err(RunError::run)?;
    warnings.extend(prompts.warnings.iter().cloned());
    let instances = prompts.instances;
    log::info!("{} prompts from {}", instances.len(), cfg.dataset_path.display());

    let provider = provider_from_spec(&cfg.telemetry).map_err(RunError::run)?;
    let client = OpenAiClient::new(
        &cfg.endpoint_url,
        ClientParams {
            model: cfg.model_id.clone(),
            max_tokens: cfg.max_output_tokens,
            temperature: 0.0,
        },
    );

    let (cold_start, backend) = match &cfg.backend_launch {
        Some(spec) => {
            let env = [
                ("BENCH_MODEL_ID".to_string(), cfg.model_id.clone()),
                ("BENCH_QUANTIZATION".to_string(), cfg.quantization.clone()),
            ];
            let (cs, proc) = launch_and_probe(spec, &client, &env).await.map_err(RunError::run)?;
            (cs, Some(proc))
        }
        None => (
            attach_and_probe(&client, config::DEFAULT_READY_PATH, ATTACH_READY_TIMEOUT)
                .await
                .map_err(RunError::run)?,
            None,
        ),
    };
    log::info!("backend ready, cold start {:.3}s", cold_start.t_cold_s);

    let mut sampler = start_sampler(provider, cfg.telemetry.interval_s(), backend.as_ref().and_then(|b| b.pid()));
    let client = Arc::new(client);
    let scenario = run_scenario(&cfg, &instances, client, &dir).await;
    let telemetry: TelemetrySeries = sampler.stop();
    if let Some(b) = backend {
        b.shutdown().await;
    }
    let (outcome, arrivals) = scenario?;
    warnings.extend(outcome.warnings.iter().cloned());
    if let Some(reason) = &outcome.abort_reason {
        warnings.push(format!("scenario aborted: {reason}"));
    }
    if telemetry.samples.is_empty() {
        warnings.push(format!("telemetry provider `{}` produced no samples; resource and energy metrics absent", telemetry.provider));
    }

    let outputs: Vec<(String, String)> = outcome
        .records
        .iter()
        .map(|r| (r.instance_id.clone(), r.output_text.clone()))
        .collect();
    let quality = plugin.quality_metrics(&outputs, &instances).map_err(RunError::run)?;

    let size = match &cfg.model_path {
        Some(p) => match model_size(p, &cfg.model_files_glob) {
            Some(m) => {
                warnings.extend(m.warning);
                Some(m.size_mb)
            }
            None => {
                warnings.push(format!("model path {} does not exist; model size and overhead absent", p.display()));
                None
            }
        },
        None => {
            warnings.push("no local model path; model size and overhead absent".to_string());
            None
        }
    };
    let metrics = compute_system_metrics(&MetricInputs {
        records: &outcome.records,
        scenario_wall_time_s: outcome.scenario_wall_time_s,
        telemetry: &telemetry,
        cold_start: Some(cold_start.clone()),
        model_size_mb: size,
        qos_ttft_s: cfg.qos_ttft_s,
        qos_e2e_s: cfg.qos_e2e_s,
    });
    if metrics.n_ok == 0 {
        warnings.push("no successful requests; latency aggregates are empty".to_string());
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        run_id,
        environment: EnvFingerprint::capture(&telemetry.provider),
        primary_metric: task::primary_metric(cfg.task, cfg.custom_metric).to_string(),
        config: cfg,
        cold_start: Some(cold_start),
        metrics,
        quality,
        scenario_start_s: outcome.scenario_start,
        aborted: outcome.aborted,
        abort_reason: outcome.abort_reason.clone(),
        files: ReportFiles {
            arrivals,
            ..ReportFiles::default()
        },
        warnings,
        definitions: report::metric_definitions(),
    };
    report::emit(&report, &outcome.records, &telemetry, &dir).map_err(RunError::run)?;
    Ok(RunOutcome {
        aborted: report.aborted,
        report,
        dir,
    })
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime")
}

fn cmd_run(cli: &Cli, args: &RunArgs) -> ExitStatus {
    let cfg = match load_with_overrides(&args.config, &args.overrides, cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitStatus::ConfigError;
        }
    };
    let out_root = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    match runtime().block_on(execute_run(cfg, &out_root)) {
        Ok(outcome) => {
            print!("{}", report::render_summary(&outcome.report));
            println!("report: {}", outcome.dir.display());
            if outcome.aborted {
                eprintln!("run error: {}", outcome.report.abort_reason.as_deref().unwrap_or("aborted"));
                ExitStatus::RunError
            } else if cli.fail_on_qos && outcome.qos_violated() {
                eprintln!("QoS thresholds violated");
                ExitStatus::QosFailure
            } else {
                ExitStatus::Ok
            }
        }
        Err(e) => {
            eprintln!("{}: {e}", if matches!(e, RunError::Config(_)) { "config error" } else { "run error" });
            e.exit_status()
        }
    }
}

fn cmd_validate(cli: &Cli, args: &RunArgs) -> ExitStatus {
    match load_with_overrides(&args.config, &args.overrides, cli.seed) {
        Ok(cfg) => {
            print!("{}", cfg.to_yaml());
            ExitStatus::Ok
        }
        Err(e) => {
            eprintln!("config error: {e}");
            ExitStatus::ConfigError
        }
    }
}

async fn shutdown_signal() {
    use tokio::signal::unix::{signal, SignalKind};
    let mut term = signal(SignalKind::terminate()).expect("signal handler");
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {}
        _ = term.recv() => {}
    }
}

fn cmd_mock_serve(profile: &Path, host: &str, port: u16) -> ExitStatus {
    let profile = match MockProfile::load(profile) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("profile error: {e}");
            return ExitStatus::ConfigError;
        }
    };
    let addr: SocketAddr = match format!("{host}:{port}").parse() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("bad address {host}:{port}: {e}");
            return ExitStatus::ConfigError;
        }
    };
    runtime().block_on(async move {
        let server = tokio::select! {
            s = mockserver::serve(profile, addr) => s,
            _ = shutdown_signal() => return ExitStatus::Ok,
        };
        let server = match server {
            Ok(s) => s,
            Err(e) => {
                eprintln!("mock-serve: {e}");
                return ExitStatus::RunError;
            }
        };
        println!("listening on {}", server.base_url());
        shutdown_signal().await;
        let stats = server.stats();
        server.shutdown().await;
        println!("{}", serde_json::to_string(&stats).expect("stats serialize"));
        ExitStatus::Ok
    })
}

fn cmd_compare(cli: &Cli, base: &Path, variants: &[PathBuf]) -> ExitStatus {
    let out = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let refs: Vec<&Path> = variants.iter().map(PathBuf::as_path).collect();
    match report::compare_files(base, &refs, &out) {
        Ok((_, text)) => {
            print!("{text}");
            ExitStatus::Ok
        }
        Err(report::CompareError::Report(e)) => {
            eprintln!("compare: {e}");
            ExitStatus::RunError
        }
        Err(e) => {
            eprintln!("compare refused: {e}");
            ExitStatus::ConfigError
        }
    }
}

fn cmd_recompute(dir: &Path) -> ExitStatus {
    match report::recompute_dir(dir) {
        Ok(outcome) => {
            print!("{}", outcome.render());
            if outcome.all_ok() {
                ExitStatus::Ok
            } else {
                ExitStatus::RunError
            }
        }
        Err(e) => {
            eprintln!("recompute: {e}");
            ExitStatus::RunError
        }
    }
}

/// Parses `args` and runs the chosen command.
pub fn run_cli<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::ConfigError } else { ExitStatus::Ok };
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp_millis()
        .try_init();
    clock::epoch();
    match &cli.command {
        Command::Run(args) => cmd_run(&cli, args),
        Command::Validate(args) => cmd_validate(&cli, args),
        Command::MockServe { profile, port, host } => cmd_mock_serve(profile, host, *port),
        Command::Compare { base, variants } => cmd_compare(&cli, base, variants),
        Command::Recompute { report_dir } => cmd_recompute(report_dir),
    }
}
