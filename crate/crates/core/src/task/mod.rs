//! Task plugins: turn a dataset into prompts and score generated outputs.
//!
//! Each task implements [`Task`], which pairs prompt generation with the
//! task's quality metric. [`for_kind`] instantiates the plugin named in the
//! run configuration.

mod dataset;
pub mod mmlu;
pub mod qa;
pub mod rouge;
pub mod sql;
pub mod template;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{CustomMetric, TaskKind};

pub use dataset::{load_records, select_indices};
pub use template::PromptTemplate;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("dataset {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("dataset {path} line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("dataset {0} contains no records")]
    Empty(PathBuf),
    #[error("template: {0}")]
    Template(String),
    #[error("database {path}: {message}")]
    Database { path: String, message: String },
}

/// A rendered prompt together with its gold answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub prompt: String,
    pub references: Vec<String>,
    #[serde(default)]
    pub aux: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub metric_name: String,
    pub value: f64,
    pub per_instance: Vec<(String, f64)>,
}

impl QualityScore {
    /// Builds a score whose value is the mean of the per-instance values
    /// (0 when there are none).
    pub fn from_values(metric_name: &str, per_instance: Vec<(String, f64)>) -> Self {
        let value = if per_instance.is_empty() {
            0.0
        } else {
            per_instance.iter().map(|(_, v)| v).sum::<f64>() / per_instance.len() as f64
        };
        QualityScore {
            metric_name: metric_name.to_string(),
            value,
            per_instance,
        }
    }
}

/// Output of prompt generation.
#[derive(Debug, Clone)]
pub struct PromptSet {
    pub instances: Vec<TaskInstance>,
    pub warnings: Vec<String>,
}

pub trait Task: Send + Sync {
    fn kind(&self) -> TaskKind;

    /// Renders one dataset record into an instance.
    fn instance_from_record(
        &self,
        id: String,
        record: &serde_json::Value,
        dataset_dir: &Path,
    ) -> Result<TaskInstance, String>;

    /// Scores `outputs` (instance id, generated text) against `instances`.
    fn quality_metrics(
        &self,
        outputs: &[(String, String)],
        instances: &[TaskInstance],
    ) -> Result<Vec<QualityScore>, TaskError>;

    /// Loads `dataset_path`, subsamples `samples` records with a seeded
    /// shuffle, and renders them.
    fn generate_prompts(
        &self,
        dataset_path: &Path,
        samples: usize,
        seed: u64,
    ) -> Result<PromptSet, TaskError> {
        let records = load_records(dataset_path)?;
        let mut warnings = Vec::new();
        if records.len() < samples {
            warnings.push(format!(
                "dataset {} has {} records, fewer than the requested {samples}; using all",
                dataset_path.display(),
                records.len()
            ));
        }
        let dir = dataset_path.parent().unwrap_or(Path::new("."));
        let chosen = select_indices(records.len(), samples, seed);
        let mut instances = Vec::with_capacity(chosen.len());
        for index in chosen {
            let (line, record) = &records[index];
            let id = record
                .get("id")
                .and_then(|v| match v {
                    serde_json::Value::String(s) => Some(s.clone()),
                    serde_json::Value::Number(n) => Some(n.to_string()),
                    _ => None,
                })
                .unwrap_or_else(|| format!("{}-{line}", self.kind()));
            let instance = self
                .instance_from_record(id, record, dir)
                .map_err(|message| TaskError::Malformed {
                    path: dataset_path.to_path_buf(),
                    line: *line,
                    message,
                })?;
            instances.push(instance);
        }
        let mut seen = std::collections::HashSet::new();
        for inst in &instances {
            if !seen.insert(inst.id.as_str()) {
                return Err(TaskError::Malformed {
                    path: dataset_path.to_path_buf(),
                    line: 0,
                    message: format!("duplicate instance id `{}`", inst.id),
                });
            }
        }
        Ok(PromptSet {
            instances,
            warnings,
        })
    }
}

/// Looks up the instance each output belongs to, skipping unknown ids.
pub(crate) fn pair_outputs<'a>(
    outputs: &'a [(String, String)],
    instances: &'a [TaskInstance],
) -> Vec<(&'a TaskInstance, &'a str)> {
    let by_id: HashMap<&str, &TaskInstance> =
        instances.iter().map(|i| (i.id.as_str(), i)).collect();
    outputs
        .iter()
        .filter_map(|(id, text)| by_id.get(id.as_str()).map(|inst| (*inst, text.as_str())))
        .collect()
}

pub(crate) fn str_field<'a>(record: &'a serde_json::Value, name: &str) -> Result<&'a str, String> {
    record
        .get(name)
        .ok_or_else(|| format!("missing field `{name}`"))?
        .as_str()
        .ok_or_else(|| format!("field `{name}` must be a string"))
}

pub(crate) fn string_list(record: &serde_json::Value, name: &str) -> Result<Vec<String>, String> {
    let arr = record
        .get(name)
        .ok_or_else(|| format!("missing field `{name}`"))?
        .as_array()
        .ok_or_else(|| format!("field `{name}` must be a list"))?;
    arr.iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| format!("field `{name}` must contain strings"))
        })
        .collect()
}

/// Free-form task: records are `{prompt, references}`.
pub struct CustomTask {
    pub template: PromptTemplate,
    pub metric: CustomMetric,
}

impl Task for CustomTask {
    fn kind(&self) -> TaskKind {
        TaskKind::Custom
    }

    fn instance_from_record(
        &self,
        id: String,
        record: &serde_json::Value,
        _dataset_dir: &Path,
    ) -> Result<TaskInstance, String> {
        let prompt = str_field(record, "prompt")?;
        let references = match record.get("references") {
            Some(_) => string_list(record, "references")?,
            None => Vec::new(),
        };
        let mut vars = HashMap::new();
        vars.insert("prompt", prompt.to_string());
        let prompt = self.template.render(&vars)?;
        Ok(TaskInstance {
            id,
            prompt,
            references,
            aux: BTreeMap::new(),
        })
    }

    fn quality_metrics(
        &self,
        outputs: &[(String, String)],
        instances: &[TaskInstance],
    ) -> Result<Vec<QualityScore>, TaskError> {
        Ok(vec![match self.metric {
            CustomMetric::RougeL => rouge::score_rouge_l(outputs, instances),
            CustomMetric::F1 => qa::score_qa_f1(outputs, instances),
            CustomMetric::Accuracy => mmlu::score_mmlu(outputs, instances),
        }])
    }
}

/// Instantiates the plugin for `kind`, optionally with a template file.
pub fn for_kind(
    kind: TaskKind,
    template_path: Option<&Path>,
    custom_metric: Option<CustomMetric>,
) -> Result<Box<dyn Task>, TaskError> {
    let template = match template_path {
        Some(path) => PromptTemplate::from_file(path)?,
        None => PromptTemplate::default_for(kind),
    };
    Ok(match kind {
        TaskKind::Mmlu => Box::new(mmlu::MmluTask { template }),
        TaskKind::Qa => Box::new(qa::QaTask { template }),
        TaskKind::Summarization => Box::new(rouge::SummarizationTask { template }),
        TaskKind::Sql => Box::new(sql::SqlTask { template }),
        TaskKind::Custom => Box::new(CustomTask {
            template,
            metric: custom_metric.unwrap_or(CustomMetric::RougeL),
        }),
    })
}

/// The headline metric name reported for a task.
pub fn primary_metric(kind: TaskKind, custom_metric: Option<CustomMetric>) -> &'static str {
    match kind {
        TaskKind::Mmlu => "accuracy",
        TaskKind::Qa => "f1",
        TaskKind::Summarization => "rouge_l",
        TaskKind::Sql => "execution_accuracy",
        TaskKind::Custom => match custom_metric.unwrap_or(CustomMetric::RougeL) {
            CustomMetric::RougeL => "rouge_l",
            CustomMetric::F1 => "f1",
            CustomMetric::Accuracy => "accuracy",
        },
    }
}
