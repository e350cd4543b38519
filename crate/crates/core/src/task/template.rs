//! Prompt templates with `{name}` placeholders.

use std::collections::HashMap;
use std::path::Path;

use crate::config::TaskKind;

use super::TaskError;

pub const MMLU_TEMPLATE: &str = "Answer the following multiple choice question.\n\n{question}\n\n{choices}\n\nAnswer with a single letter (A, B, C, or D).";

pub const QA_TEMPLATE: &str = "Read the context and answer the question with a short span copied from the context. If the question cannot be answered from the context, reply with exactly: unanswerable\n\nContext: {context}\n\nQuestion: {question}\n\nAnswer:";

pub const SUMMARIZATION_TEMPLATE: &str =
    "Summarize the following news article in three or four sentences.\n\n{article}\n\nSummary:";

pub const SQL_TEMPLATE: &str = "Given the following SQLite database schema, write a single SQL query that answers the question. Return only the SQL.\n\n{schema}\n\nQuestion: {question}\n\nSQL:";

pub const CUSTOM_TEMPLATE: &str = "{prompt}";

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        PromptTemplate { text: text.into() }
    }

    pub fn from_file(path: &Path) -> Result<Self, TaskError> {
        std::fs::read_to_string(path)
            .map(PromptTemplate::new)
            .map_err(|e| TaskError::Template(format!("{}: {e}", path.display())))
    }

    pub fn default_for(kind: TaskKind) -> Self {
        PromptTemplate::new(match kind {
            TaskKind::Mmlu => MMLU_TEMPLATE,
            TaskKind::Qa => QA_TEMPLATE,
            TaskKind::Summarization => SUMMARIZATION_TEMPLATE,
            TaskKind::Sql => SQL_TEMPLATE,
            TaskKind::Custom => CUSTOM_TEMPLATE,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Replaces every `{name}` with its value. Unknown placeholders are an
    /// error; literal braces are written as `{{` and `}}`.
    pub fn render(&self, vars: &HashMap<&str, String>) -> Result<String, String> {
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text.as_str();
        while let Some(pos) = rest.find(['{', '}']) {
            out.push_str(&rest[..pos]);
            let tail = &rest[pos..];
            if tail.starts_with("{{") {
                out.push('{');
                rest = &tail[2..];
            } else if tail.starts_with("}}") {
                out.push('}');
                rest = &tail[2..];
            } else if tail.starts_with('{') {
                let end = tail
                    .find('}')
                    .ok_or_else(|| "unterminated placeholder".to_string())?;
                let name = &tail[1..end];
                let value = vars
                    .get(name)
                    .ok_or_else(|| format!("template placeholder `{{{name}}}` has no value"))?;
                out.push_str(value);
                rest = &tail[end + 1..];
            } else {
                out.push('}');
                rest = &tail[1..];
            }
        }
        out.push_str(rest);
        if out.trim().is_empty() {
            return Err("rendered prompt is empty".to_string());
        }
        Ok(out)
    }
}
