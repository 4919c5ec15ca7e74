use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::normalize_answer;
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerType {
    Span,
    Boolean,
    Free,
}

/// One normalized Q&A item. The supporting facts are withheld from the
/// answering model and only shown to the pseudo-user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub supporting_facts: Vec<String>,
    #[serde(default)]
    pub gold_answers: Vec<String>,
    #[serde(default = "default_answer_type")]
    pub answer_type: AnswerType,
}

fn default_answer_type() -> AnswerType {
    AnswerType::Span
}

impl DatasetRecord {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.id.trim().is_empty() {
            v.push("id is empty".to_string());
        }
        if self.question.trim().is_empty() {
            v.push("question is empty".to_string());
        }
        if self.gold_answers.is_empty() {
            v.push("gold_answers is missing or empty".to_string());
        }
        if self.answer_type == AnswerType::Boolean {
            for g in &self.gold_answers {
                let n = normalize_answer(g);
                if !matches!(n.as_str(), "true" | "false" | "yes" | "no") {
                    v.push(format!("boolean gold answer '{g}' is not yes/no/true/false"));
                }
            }
        }
        v
    }
}

/// Parses normalized JSONL: one record per non-blank line, in file order.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(line).map_err(|e| EvalError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let violations = rec.violations();
        if !violations.is_empty() {
            return Err(EvalError::InvalidRecord {
                line: line_no,
                id: rec.id,
                violations,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_dataset(&text)
}
