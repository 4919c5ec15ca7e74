//! Evaluation harness: datasets, answer metrics, LLM judges and the
//! experiment runner that compares answering methods over a dataset.

mod dataset;
mod judge;
mod mask;
mod metrics;
mod report;
mod runner;

use std::path::PathBuf;

use thiserror::Error;

use crate::backends::BackendError;
use crate::engine::TemplateError;

pub use dataset::{load_dataset, parse_dataset, AnswerType, DatasetRecord};
pub use judge::{judge_accuracy, pairwise_judge, parse_pairwise_verdict, parse_verdict, presentation_swapped, PairwiseVerdict};
pub use mask::{mask_context, MASK_TOKEN};
pub use metrics::{canonical_boolean, exact_match, f1_score, normalize_answer};
pub use report::{ExperimentReport, MethodOutcome, MethodRow, PairwiseSummary, RecordOutcome, SweepReport, SweepRow};
pub use runner::{
    record_seed, run_experiment, run_sweep, BackendSpec, BackendsConfig, EmbedSpec, ExperimentConfig, LiveOverrides, Method,
    SweepAxes,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: invalid record '{id}': {}", .violations.join("; "))]
    InvalidRecord {
        line: usize,
        id: String,
        violations: Vec<String>,
    },
    #[error("experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}
