//! Multiple-choice knowledge and reasoning (MMLU-style records).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::config::TaskKind;

use super::{pair_outputs, str_field, string_list, PromptTemplate, QualityScore, Task, TaskError, TaskInstance};

const LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];

pub struct MmluTask {
    pub template: PromptTemplate,
}

impl Task for MmluTask {
    fn kind(&self) -> TaskKind {
        TaskKind::Mmlu
    }

    fn instance_from_record(
        &self,
        id: String,
        record: &serde_json::Value,
        _dataset_dir: &Path,
    ) -> Result<TaskInstance, String> {
        let question = str_field(record, "question")?;
        let choices = string_list(record, "choices")?;
        if choices.len() != 4 {
            return Err(format!("`choices` must have 4 entries, found {}", choices.len()));
        }
        let answer = match record.get("answer") {
            Some(serde_json::Value::String(s)) => s.trim().to_ascii_uppercase(),
            // Integer answers (0..3) appear in some exports.
            Some(serde_json::Value::Number(n)) => n
                .as_u64()
                .filter(|i| *i < 4)
                .map(|i| LETTERS[i as usize].to_string())
                .ok_or_else(|| "numeric `answer` must be 0..3".to_string())?,
            Some(_) => return Err("field `answer` must be a letter".to_string()),
            None => return Err("missing field `answer`".to_string()),
        };
        if !matches!(answer.as_str(), "A" | "B" | "C" | "D") {
            return Err(format!("`answer` must be one of A-D, found `{answer}`"));
        }
        let formatted = choices
            .iter()
            .zip(LETTERS)
            .map(|(c, l)| format!("{l}. {c}"))
            .collect::<Vec<_>>()
            .join("\n");
        let mut vars = HashMap::new();
        vars.insert("question", question.to_string());
        vars.insert("choices", formatted);
        for (c, l) in choices.iter().zip(["A", "B", "C", "D"]) {
            vars.insert(l, c.clone());
        }
        Ok(TaskInstance {
            id,
            prompt: self.template.render(&vars)?,
            references: vec![answer],
            aux: BTreeMap::new(),
        })
    }

    fn quality_metrics(
        &self,
        outputs: &[(String, String)],
        instances: &[TaskInstance],
    ) -> Result<Vec<QualityScore>, TaskError> {
        Ok(vec![score_mmlu(outputs, instances)])
    }
}

/// First standalone letter A-D (case-insensitive) in `text`.
pub fn extract_choice(text: &str) -> Option<char> {
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let upper = c.to_ascii_uppercase();
        if !LETTERS.contains(&upper) {
            continue;
        }
        let before_ok = i == 0 || !chars[i - 1].is_alphanumeric();
        let after_ok = i + 1 == chars.len() || !chars[i + 1].is_alphanumeric();
        if before_ok && after_ok {
            return Some(upper);
        }
    }
    None
}

pub fn score_mmlu(outputs: &[(String, String)], instances: &[TaskInstance]) -> QualityScore {
    let values = pair_outputs(outputs, instances)
        .into_iter()
        .map(|(inst, text)| {
            let gold = inst
                .references
                .first()
                .and_then(|r| r.trim().chars().next())
                .map(|c| c.to_ascii_uppercase());
            let hit = matches!((extract_choice(text), gold), (Some(p), Some(g)) if p == g);
            (inst.id.clone(), if hit { 1.0 } else { 0.0 })
        })
        .collect();
    QualityScore::from_values("accuracy", values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: &str, gold: &str) -> TaskInstance {
        TaskInstance {
            id: id.into(),
            prompt: "q".into(),
            references: vec![gold.into()],
            aux: BTreeMap::new(),
        }
    }

    fn score(output: &str, gold: &str) -> f64 {
        score_mmlu(&[("x".into(), output.into())], &[inst("x", gold)]).value
    }

    #[test]
    fn direct_extraction() {
        assert_eq!(score("The answer is B.", "B"), 1.0);
    }

    #[test]
    fn lowercase_letter() {
        assert_eq!(score("b", "B"), 1.0);
    }

    #[test]
    fn unextractable_is_zero() {
        assert_eq!(score("I am not sure", "C"), 0.0);
        assert_eq!(extract_choice("I am not sure"), None);
    }

    #[test]
    fn letter_inside_word_ignored() {
        assert_eq!(extract_choice("Because (D)"), Some('D'));
        assert_eq!(extract_choice("ABC"), None);
    }

    #[test]
    fn numeric_answer_record() {
        let task = MmluTask {
            template: PromptTemplate::default_for(TaskKind::Mmlu),
        };
        let rec = serde_json::json!({"question": "2+2?", "choices": ["1","2","3","4"], "answer": 3});
        let i = task.instance_from_record("q".into(), &rec, Path::new(".")).unwrap();
        assert_eq!(i.references, vec!["D"]);
        assert!(i.prompt.contains("D. 4"));
    }
}
