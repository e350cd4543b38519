//! Baseline-relative deltas between runs of the same task.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pareto::{pareto_frontier, ParetoPoint, COST_DIRECTION, QUALITY_DIRECTION};
use super::{load_report, ReportError, RunReport};

pub const COMPARISON_FILE: &str = "comparison.json";

/// The metrics compared between runs, with how to read each from a report.
pub const COMPARED_METRICS: [&str; 8] = [
    "quality",
    "tpot_ms",
    "energy_per_token_j",
    "model_size_gb",
    "ttft_ms",
    "gl_s",
    "tps",
    "energy_wh",
];

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("schema_version mismatch: base {base}, {run_id} has {variant}")]
    Schema { base: u32, variant: u32, run_id: String },
    #[error("task mismatch: base is {base}, {run_id} is {variant}")]
    Task { base: String, variant: String, run_id: String },
}

/// `100 * (variant - base) / base`; `None` when `base` is zero or either
/// input is not finite.
pub fn delta_pct(base: f64, variant: f64) -> Option<f64> {
    if base == 0.0 || !base.is_finite() || !variant.is_finite() {
        return None;
    }
    Some(100.0 * (variant - base) / base)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub base: Option<f64>,
    pub variant: Option<f64>,
    pub delta_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub base_run_id: String,
    pub variant_run_id: String,
    pub metrics: BTreeMap<String, MetricDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub quality_metric: String,
    pub quality_direction: String,
    pub cost_metric: String,
    pub cost_direction: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub task: String,
    pub quality_metric: String,
    pub base_run_id: String,
    pub cells: Vec<ComparisonCell>,
    pub frontiers: Vec<Frontier>,
    pub warnings: Vec<String>,
}

fn metric_value(report: &RunReport, name: &str) -> Option<f64> {
    let m = &report.metrics;
    match name {
        "quality" => report.quality_value(),
        "tpot_ms" => m.tpot_s.map(|a| a.mean * 1000.0),
        "energy_per_token_j" => m.energy.and_then(|e| e.energy_per_token_j),
        "model_size_gb" => m.model_size_mb.map(|mb| mb / 1000.0),
        "ttft_ms" => m.ttft_s.map(|a| a.mean * 1000.0),
        "gl_s" => m.gl_s.map(|a| a.mean),
        "tps" => Some(m.tps),
        "energy_wh" => m.energy.map(|e| e.energy_wh),
        _ => None,
    }
}

fn cell(base: &RunReport, variant: &RunReport, warnings: &mut Vec<String>) -> ComparisonCell {
    let mut metrics = BTreeMap::new();
    for name in COMPARED_METRICS {
        let b = metric_value(base, name);
        let v = metric_value(variant, name);
        let d = match (b, v) {
            (Some(b), Some(v)) => {
                let d = delta_pct(b, v);
                if d.is_none() {
                    warnings.push(format!("{name}: base value is 0 for {}, delta absent", base.run_id));
                }
                d
            }
            _ => None,
        };
        metrics.insert(
            name.to_string(),
            MetricDelta {
                base: b,
                variant: v,
                delta_pct: d,
            },
        );
    }
    ComparisonCell {
        base_run_id: base.run_id.clone(),
        variant_run_id: variant.run_id.clone(),
        metrics,
    }
}

fn frontier(runs: &[&RunReport], cost: &str, quality_metric: &str) -> Frontier {
    let pts: Vec<(usize, ParetoPoint)> = runs
        .iter()
        .enumerate()
        .filter_map(|(i, r)| Some((i, ParetoPoint::new(metric_value(r, "quality")?, metric_value(r, cost)?))))
        .collect();
    let points: Vec<ParetoPoint> = pts.iter().map(|(_, p)| *p).collect();
    Frontier {
        quality_metric: quality_metric.to_string(),
        quality_direction: QUALITY_DIRECTION.to_string(),
        cost_metric: cost.to_string(),
        cost_direction: COST_DIRECTION.to_string(),
        members: pareto_frontier(&points)
            .into_iter()
            .map(|k| runs[pts[k].0].run_id.clone())
            .collect(),
    }
}

/// Compares each variant with `base`. All runs must share schema version and
/// task.
pub fn compare_reports(base: &RunReport, variants: &[RunReport]) -> Result<Comparison, CompareError> {
    for v in variants {
        if v.schema_version != base.schema_version {
            return Err(CompareError::Schema {
                base: base.schema_version,
                variant: v.schema_version,
                run_id: v.run_id.clone(),
            });
        }
        if v.config.task != base.config.task {
            return Err(CompareError::Task {
                base: base.config.task.to_string(),
                variant: v.config.task.to_string(),
                run_id: v.run_id.clone(),
            });
        }
    }
    let mut warnings = Vec::new();
    let cells = variants.iter().map(|v| cell(base, v, &mut warnings)).collect();
    let mut all: Vec<&RunReport> = vec![base];
    all.extend(variants.iter());
    let frontiers = ["tpot_ms", "energy_per_token_j"]
        .into_iter()
        .map(|c| frontier(&all, c, &base.primary_metric))
        .collect();
    Ok(Comparison {
        schema_version: base.schema_version,
        task: base.config.task.to_string(),
        quality_metric: base.primary_metric.clone(),
        base_run_id: base.run_id.clone(),
        cells,
        frontiers,
        warnings,
    })
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".to_string())
}

/// A block with one row per run: quality, TPOT, J/token and size, each
/// followed by its delta against the base.
pub fn render_comparison(c: &Comparison) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "task: {}  base: {}", c.task, c.base_run_id);
    let _ = writeln!(
        s,
        "{:<36} {:>10} {:>9} {:>11} {:>9} {:>11} {:>9} {:>10}",
        "run", c.quality_metric, "dQ(%)", "TPOT(ms)", "dTPOT(%)", "J/token", "dE(%)", "size(GB)"
    );
    let mut rows: Vec<(String, &BTreeMap<String, MetricDelta>, bool)> = Vec::new();
    if let Some(first) = c.cells.first() {
        rows.push((c.base_run_id.clone(), &first.metrics, true));
    }
    for cell in &c.cells {
        rows.push((cell.variant_run_id.clone(), &cell.metrics, false));
    }
    for (id, m, is_base) in rows {
        let val = |k: &str| {
            let d = &m[k];
            if is_base {
                d.base
            } else {
                d.variant
            }
        };
        let delta = |k: &str| if is_base { Some(0.0) } else { m[k].delta_pct };
        let _ = writeln!(
            s,
            "{:<36} {:>10} {:>9} {:>11} {:>9} {:>11} {:>9} {:>10}",
            id,
            num(val("quality")),
            num(delta("quality")),
            num(val("tpot_ms")),
            num(delta("tpot_ms")),
            num(val("energy_per_token_j")),
            num(delta("energy_per_token_j")),
            num(val("model_size_gb")),
        );
    }
    for f in &c.frontiers {
        let _ = writeln!(
            s,
            "pareto ({} {}, {} {}): {}",
            f.quality_metric,
            f.quality_direction,
            f.cost_metric,
            f.cost_direction,
            if f.members.is_empty() { "n/a".to_string() } else { f.members.join(", ") }
        );
    }
    for w in &c.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// Loads reports, compares them and writes `comparison.json` into `out_dir`.
pub fn compare_files(base: &Path, variants: &[&Path], out_dir: &Path) -> Result<(Comparison, String), CompareError> {
    let base = load_report(base)?;
    let variants = variants
        .iter()
        .map(|p| load_report(p))
        .collect::<Result<Vec<_>, _>>()?;
    let comparison = compare_reports(&base, &variants)?;
    let path = out_dir.join(COMPARISON_FILE);
    std::fs::create_dir_all(out_dir).map_err(|e| ReportError::io(out_dir, e))?;
    std::fs::write(&path, serde_json::to_string_pretty(&comparison).expect("serializes"))
        .map_err(|e| ReportError::io(&path, e))?;
    Ok((comparison.clone(), render_comparison(&comparison)))
}
