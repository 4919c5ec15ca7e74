//! Prompt templates with `{placeholder}` substitution.
//!
//! Defaults are compiled in from `templates/*.txt`; any file of the same
//! name in a user-supplied directory replaces the default.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{AugmentedQuery, Demonstration};

pub const ENV_TEMPLATES: &str = "INQUEST_TEMPLATES";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template '{template}' uses unknown placeholder {{{placeholder}}}")]
    UnknownPlaceholder { template: String, placeholder: String },
    #[error("template '{template}' placeholder {{{placeholder}}} is unbound")]
    Unbound { template: String, placeholder: String },
    #[error("reading template {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// A named template. Placeholders are `{identifier}`; any other brace is literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    name: String,
    source: String,
}

impl Template {
    pub fn new(name: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            source: source.into().trim_end().to_string(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        scan(&self.source)
            .into_iter()
            .filter_map(|seg| match seg {
                Segment::Placeholder(p) => Some(p.to_string()),
                Segment::Literal(_) => None,
            })
            .collect()
    }

    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.source.len());
        for seg in scan(&self.source) {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Placeholder(p) => {
                    let value = bindings
                        .iter()
                        .find(|(k, _)| *k == p)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| TemplateError::Unbound {
                            template: self.name.clone(),
                            placeholder: p.to_string(),
                        })?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }
}

enum Segment<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

fn scan(src: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = src;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let ident_len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(after.len());
        if ident_len > 0 && after[ident_len..].starts_with('}') {
            out.push(Segment::Literal(&rest[..open]));
            out.push(Segment::Placeholder(&after[..ident_len]));
            rest = &after[ident_len + 1..];
        } else {
            out.push(Segment::Literal(&rest[..=open]));
            rest = after;
        }
    }
    out.push(Segment::Literal(rest));
    out
}

/// Placeholders each template may use.
const SPECS: &[(&str, &[&str], &str)] = &[
    ("answer_direct", &["demonstrations", "query"], include_str!("../../templates/answer_direct.txt")),
    ("answer_cot", &["demonstrations", "query"], include_str!("../../templates/answer_cot.txt")),
    (
        "answer_augmented",
        &["demonstrations", "query", "qa_block"],
        include_str!("../../templates/answer_augmented.txt"),
    ),
    (
        "answer_augmented_cot",
        &["demonstrations", "query", "qa_block"],
        include_str!("../../templates/answer_augmented_cot.txt"),
    ),
    ("generate_questions", &["query", "n"], include_str!("../../templates/generate_questions.txt")),
    (
        "demonstrations_block",
        &["question", "answer"],
        include_str!("../../templates/demonstrations_block.txt"),
    ),
    (
        "judge_accuracy",
        &["question", "prediction", "gold"],
        include_str!("../../templates/judge_accuracy.txt"),
    ),
    (
        "judge_pairwise",
        &["question", "answer_a", "answer_b"],
        include_str!("../../templates/judge_pairwise.txt"),
    ),
];

/// Every prompt the engine and evaluator send.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplateSet {
    pub answer_direct: Template,
    pub answer_cot: Template,
    pub answer_augmented: Template,
    pub answer_augmented_cot: Template,
    pub generate_questions: Template,
    pub demonstrations_block: Template,
    pub judge_accuracy: Template,
    pub judge_pairwise: Template,
}

impl Default for PromptTemplateSet {
    fn default() -> Self {
        Self::from_sources(|name| SPECS.iter().find(|s| s.0 == name).map(|s| s.2.to_string()))
            .expect("built-in templates are valid")
    }
}

impl PromptTemplateSet {
    fn from_sources(mut get: impl FnMut(&str) -> Option<String>) -> Result<Self, TemplateError> {
        let mut loaded = Vec::with_capacity(SPECS.len());
        for (name, allowed, default) in SPECS {
            let t = Template::new(*name, get(name).unwrap_or_else(|| default.to_string()));
            if let Some(bad) = t.placeholders().into_iter().find(|p| !allowed.contains(&p.as_str())) {
                return Err(TemplateError::UnknownPlaceholder {
                    template: name.to_string(),
                    placeholder: bad,
                });
            }
            loaded.push(t);
        }
        let mut it = loaded.into_iter();
        let mut next = || it.next().expect("one template per spec");
        Ok(Self {
            answer_direct: next(),
            answer_cot: next(),
            answer_augmented: next(),
            answer_augmented_cot: next(),
            generate_questions: next(),
            demonstrations_block: next(),
            judge_accuracy: next(),
            judge_pairwise: next(),
        })
    }

    /// Reads `<name>.txt` overrides from `dir`; missing files keep the default.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let dir = dir.as_ref();
        let mut err = None;
        let set = Self::from_sources(|name| {
            let path = dir.join(format!("{name}.txt"));
            match std::fs::read_to_string(&path) {
                Ok(s) => Some(s),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
                Err(e) => {
                    err.get_or_insert(TemplateError::Io {
                        path,
                        message: e.to_string(),
                    });
                    None
                }
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(set),
        }
    }

    /// Loads from `dir`, else from `$INQUEST_TEMPLATES`, else the defaults.
    pub fn resolve(dir: Option<&Path>) -> Result<Self, TemplateError> {
        match dir {
            Some(d) => Self::load_dir(d),
            None => match std::env::var_os(ENV_TEMPLATES) {
                Some(d) if !d.is_empty() => Self::load_dir(PathBuf::from(d)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn render_demonstrations(&self, demos: &[Demonstration]) -> Result<String, TemplateError> {
        let mut out = String::new();
        for d in demos {
            out.push_str(
                &self
                    .demonstrations_block
                    .render(&[("question", &d.question), ("answer", &d.answer)])?,
            );
            out.push_str("\n\n");
        }
        Ok(out)
    }

    /// Answer prompt for the query in its current form.
    pub fn render_answer(&self, query: &AugmentedQuery, chain_of_thought: bool) -> Result<String, TemplateError> {
        let demos = self.render_demonstrations(query.base().demonstrations())?;
        let base = query.base().text();
        if query.rounds().is_empty() {
            let t = if chain_of_thought {
                &self.answer_cot
            } else {
                &self.answer_direct
            };
            t.render(&[("demonstrations", &demos), ("query", base)])
        } else {
            let t = if chain_of_thought {
                &self.answer_augmented_cot
            } else {
                &self.answer_augmented
            };
            let qa = query.render_clarifications();
            t.render(&[("demonstrations", &demos), ("query", base), ("qa_block", &qa)])
        }
    }

    pub fn render_generate_questions(&self, query: &AugmentedQuery, n: usize) -> Result<String, TemplateError> {
        self.generate_questions
            .render(&[("query", &query.render()), ("n", &n.to_string())])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UserQuery;

    #[test]
    fn placeholder_scan() {
        let t = Template::new("t", "a {x} b {y_1} {not valid} {} {x}");
        assert_eq!(t.placeholders().into_iter().collect::<Vec<_>>(), ["x", "y_1"]);
        assert_eq!(
            t.render(&[("x", "1"), ("y_1", "2")]).unwrap(),
            "a 1 b 2 {not valid} {} 1"
        );
        assert_eq!(
            t.render(&[("x", "1")]),
            Err(TemplateError::Unbound {
                template: "t".into(),
                placeholder: "y_1".into()
            })
        );
    }

    #[test]
    fn defaults_load() {
        let set = PromptTemplateSet::default();
        assert!(set.answer_cot.source().ends_with("Let's think step by step"));
        assert_eq!(
            set.generate_questions.placeholders().into_iter().collect::<Vec<_>>(),
            ["n", "query"]
        );
    }

    #[test]
    fn demonstrations_precede_query() {
        let set = PromptTemplateSet::default();
        let q = UserQuery::new(
            "Is the sky green?",
            vec![
                Demonstration::new("Is fire hot?", "yes"),
                Demonstration::new("Is ice hot?", "no"),
            ],
        )
        .unwrap();
        let p = set.render_answer(&AugmentedQuery::new(q), false).unwrap();
        let a = p.find("Is fire hot?").unwrap();
        let b = p.find("Is ice hot?").unwrap();
        let c = p.find("Is the sky green?").unwrap();
        assert!(a < b && b < c);
    }

    #[test]
    fn directory_overrides_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("answer_direct.txt"), "Q: {query}\n").unwrap();
        let set = PromptTemplateSet::load_dir(dir.path()).unwrap();
        assert_eq!(set.answer_direct.source(), "Q: {query}");
        assert_eq!(set.answer_cot, PromptTemplateSet::default().answer_cot);

        std::fs::write(dir.path().join("answer_direct.txt"), "Q: {qeury}").unwrap();
        assert!(matches!(
            PromptTemplateSet::load_dir(dir.path()),
            Err(TemplateError::UnknownPlaceholder { .. })
        ));
    }
}
