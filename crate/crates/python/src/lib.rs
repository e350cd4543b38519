//! Python bindings: config parsing, quality scorers, metric formulas,
//! arrival planning and report recomputation.

use std::path::PathBuf;

use infer_bench::{backend, config, metrics, report, task, workload};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Parse and validate a YAML benchmark config; returns the normalized
/// config as a dict. Raises ValueError naming the offending key.
#[pyfunction]
fn parse_config<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config::parse_config(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &cfg)
}

/// Normalized YAML dump of a config document.
#[pyfunction]
fn normalize_config(text: &str) -> PyResult<String> {
    config::parse_config(text)
        .map(|c| c.to_yaml())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn rouge_l(hypothesis: &str, reference: &str) -> f64 {
    task::rouge::rouge_l(hypothesis, reference)
}

#[pyfunction]
fn token_f1(prediction: &str, gold: &str) -> f64 {
    task::qa::token_f1(prediction, gold)
}

#[pyfunction]
fn extract_choice(text: &str) -> Option<String> {
    task::mmlu::extract_choice(text).map(String::from)
}

#[pyfunction]
fn extract_sql(text: &str) -> String {
    task::sql::extract_sql(text)
}

#[pyfunction]
fn count_sentences(text: &str) -> u64 {
    backend::count_sentences(text)
}

/// TTFT, TPOT and GL in seconds from one request's timestamps.
#[pyfunction]
fn request_latency<'py>(
    py: Python<'py>,
    dispatch: f64,
    first_token: f64,
    completion: f64,
    tokens: u64,
) -> PyResult<Option<Bound<'py, PyDict>>> {
    let record = backend::RequestRecord {
        seq: 0,
        instance_id: String::new(),
        arrival_time: dispatch,
        dispatch_time: dispatch,
        first_token_time: first_token,
        completion_time: completion,
        prompt_tokens: None,
        completion_tokens: tokens,
        sentence_count: 0,
        output_text: String::new(),
        status: backend::RequestStatus::Ok,
        token_source: backend::TokenSource::Usage,
        error: None,
    };
    match metrics::per_request_latency(&record) {
        None => Ok(None),
        Some(l) => {
            let d = PyDict::new(py);
            d.set_item("ttft_s", l.ttft_s)?;
            d.set_item("tpot_s", l.tpot_s)?;
            d.set_item("gl_s", l.gl_s)?;
            Ok(Some(d))
        }
    }
}

/// Mean, 95% CI half-width, nearest-rank p50/p95, min and max.
#[pyfunction]
fn aggregate<'py>(py: Python<'py>, values: Vec<f64>) -> PyResult<Option<Bound<'py, PyAny>>> {
    metrics::aggregate(&values).map(|a| to_py(py, &a)).transpose()
}

#[pyfunction]
#[pyo3(signature = (mean_power_w, t_gen_s, total_tokens, total_sentences=0))]
fn energy<'py>(
    py: Python<'py>,
    mean_power_w: f64,
    t_gen_s: f64,
    total_tokens: u64,
    total_sentences: u64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &metrics::energy(mean_power_w, t_gen_s, total_tokens, total_sentences))
}

#[pyfunction]
fn overhead(mean_mem_mb: f64, model_size_mb: f64) -> f64 {
    metrics::overhead(mean_mem_mb, model_size_mb)
}

#[pyfunction]
fn delta_pct(base: f64, variant: f64) -> Option<f64> {
    report::delta_pct(base, variant)
}

/// Indices of non-dominated (quality, cost) pairs, quality maximized and
/// cost minimized.
#[pyfunction]
fn pareto_frontier(points: Vec<(f64, f64)>) -> Vec<usize> {
    let pts: Vec<_> = points.into_iter().map(|(q, c)| report::ParetoPoint::new(q, c)).collect();
    report::pareto_frontier(&pts)
}

/// Per-user Poisson arrival offsets in seconds.
#[pyfunction]
fn plan_arrivals(users: usize, rate_rpm: f64, horizon_s: f64, seed: u64) -> Vec<Vec<f64>> {
    workload::plan_arrivals(users, rate_rpm, horizon_s, seed).per_user_arrivals
}

/// Load report.json from a run directory as a dict.
#[pyfunction]
fn load_report<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let rep = report::load_report(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    to_py(py, &rep)
}

/// Recompute a report's aggregates from its files; returns
/// (all_ok, names of failed checks).
#[pyfunction]
fn recompute(path: PathBuf) -> PyResult<(bool, Vec<String>)> {
    let out = report::recompute_dir(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let failed = out.failures().into_iter().map(|c| c.name.clone()).collect();
    Ok((out.all_ok(), failed))
}

#[pymodule]
fn infer_bench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_config, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_l, m)?)?;
    m.add_function(wrap_pyfunction!(token_f1, m)?)?;
    m.add_function(wrap_pyfunction!(extract_choice, m)?)?;
    m.add_function(wrap_pyfunction!(extract_sql, m)?)?;
    m.add_function(wrap_pyfunction!(count_sentences, m)?)?;
    m.add_function(wrap_pyfunction!(request_latency, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(overhead, m)?)?;
    m.add_function(wrap_pyfunction!(delta_pct, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_frontier, m)?)?;
    m.add_function(wrap_pyfunction!(plan_arrivals, m)?)?;
    m.add_function(wrap_pyfunction!(load_report, m)?)?;
    m.add_function(wrap_pyfunction!(recompute, m)?)?;
    Ok(())
}
