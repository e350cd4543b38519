//! Summarization scored with ROUGE-L (LCS F-measure, beta = 1).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::config::TaskKind;

use super::{pair_outputs, str_field, PromptTemplate, QualityScore, Task, TaskError, TaskInstance};

pub struct SummarizationTask {
    pub template: PromptTemplate,
}

impl Task for SummarizationTask {
    fn kind(&self) -> TaskKind {
        TaskKind::Summarization
    }

    fn instance_from_record(
        &self,
        id: String,
        record: &serde_json::Value,
        _dataset_dir: &Path,
    ) -> Result<TaskInstance, String> {
        let article = str_field(record, "article")?;
        let highlights = str_field(record, "highlights")?;
        let mut vars = HashMap::new();
        vars.insert("article", article.to_string());
        Ok(TaskInstance {
            id,
            prompt: self.template.render(&vars)?,
            references: vec![highlights.to_string()],
            aux: BTreeMap::new(),
        })
    }

    fn quality_metrics(
        &self,
        outputs: &[(String, String)],
        instances: &[TaskInstance],
    ) -> Result<Vec<QualityScore>, TaskError> {
        Ok(vec![score_rouge_l(outputs, instances)])
    }
}

pub fn rouge_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(|w| w.to_lowercase()).collect()
}

/// Length of the longest common subsequence of two token sequences.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // One rolling row over `b`.
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F1 of a hypothesis against a single reference.
pub fn rouge_l(hypothesis: &str, reference: &str) -> f64 {
    let hyp = rouge_tokens(hypothesis);
    let reff = rouge_tokens(reference);
    rouge_l_tokens(&hyp, &reff)
}

pub fn rouge_l_tokens<T: PartialEq>(hyp: &[T], reference: &[T]) -> f64 {
    let lcs = lcs_len(hyp, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / hyp.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn score_rouge_l(outputs: &[(String, String)], instances: &[TaskInstance]) -> QualityScore {
    let values = pair_outputs(outputs, instances)
        .into_iter()
        .map(|(inst, text)| {
            let best = inst
                .references
                .iter()
                .map(|r| rouge_l(text, r))
                .fold(0.0, f64::max);
            (inst.id.clone(), best)
        })
        .collect();
    QualityScore::from_values("rouge_l", values)
}
