//! Extractive question answering scored with SQuAD-style token F1.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::config::TaskKind;

use super::{pair_outputs, str_field, string_list, PromptTemplate, QualityScore, Task, TaskError, TaskInstance};

/// The token the default prompt asks for when no answer exists.
pub const NO_ANSWER_TOKEN: &str = "unanswerable";

pub struct QaTask {
    pub template: PromptTemplate,
}

impl Task for QaTask {
    fn kind(&self) -> TaskKind {
        TaskKind::Qa
    }

    fn instance_from_record(
        &self,
        id: String,
        record: &serde_json::Value,
        _dataset_dir: &Path,
    ) -> Result<TaskInstance, String> {
        let question = str_field(record, "question")?;
        let context = str_field(record, "context")?;
        let answers = string_list(record, "answers")?;
        let mut vars = HashMap::new();
        vars.insert("question", question.to_string());
        vars.insert("context", context.to_string());
        Ok(TaskInstance {
            id,
            prompt: self.template.render(&vars)?,
            references: answers,
            aux: BTreeMap::new(),
        })
    }

    fn quality_metrics(
        &self,
        outputs: &[(String, String)],
        instances: &[TaskInstance],
    ) -> Result<Vec<QualityScore>, TaskError> {
        Ok(vec![score_qa_f1(outputs, instances)])
    }
}

/// Lowercase, drop punctuation, drop the articles a/an/the, collapse
/// whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn tokens(text: &str) -> Vec<String> {
    normalize_answer(text)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Token-level F1 between a prediction and one gold answer.
pub fn token_f1(prediction: &str, gold: &str) -> f64 {
    let pred = tokens(prediction);
    let gold = tokens(gold);
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for g in &gold {
        *counts.entry(g.as_str()).or_default() += 1;
    }
    let mut common = 0usize;
    for p in &pred {
        if let Some(c) = counts.get_mut(p.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Maps an explicit abstention to the empty prediction.
fn prediction_text(output: &str) -> &str {
    if normalize_answer(output) == NO_ANSWER_TOKEN {
        ""
    } else {
        output
    }
}

pub fn score_qa_f1(outputs: &[(String, String)], instances: &[TaskInstance]) -> QualityScore {
    let values = pair_outputs(outputs, instances)
        .into_iter()
        .map(|(inst, text)| {
            let pred = prediction_text(text);
            let best = if inst.references.is_empty() {
                token_f1(pred, "")
            } else {
                inst.references
                    .iter()
                    .map(|g| token_f1(pred, g))
                    .fold(0.0, f64::max)
            };
            (inst.id.clone(), best)
        })
        .collect();
    QualityScore::from_values("f1", values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qa(pred: &str, golds: &[&str]) -> f64 {
        let inst = TaskInstance {
            id: "i".into(),
            prompt: "p".into(),
            references: golds.iter().map(|s| s.to_string()).collect(),
            aux: BTreeMap::new(),
        };
        score_qa_f1(&[("i".into(), pred.into())], &[inst]).value
    }

    #[test]
    fn exact_match() {
        assert_eq!(qa("Albert Einstein", &["Albert Einstein"]), 1.0);
    }

    #[test]
    fn partial_overlap_is_two_thirds() {
        // precision 1/1, recall 1/2
        let f = qa("Einstein", &["Albert Einstein"]);
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn both_empty_is_one() {
        assert_eq!(qa("", &[""]), 1.0);
        assert_eq!(qa("", &[]), 1.0);
        assert_eq!(qa("unanswerable", &[]), 1.0);
        assert_eq!(qa("Paris", &[]), 0.0);
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_answer("The  Eiffel, Tower!"), "eiffel tower");
        assert_eq!(qa("the Eiffel tower.", &["Eiffel Tower"]), 1.0);
    }

    #[test]
    fn max_over_references() {
        assert_eq!(qa("Paris", &["London", "Paris"]), 1.0);
    }
}
