use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::judge::PairwiseVerdict;
use super::runner::Method;
use crate::model::Strategy;

/// Result of one method on one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub prediction: Option<String>,
    pub em: Option<u8>,
    pub f1: Option<f64>,
    /// Judge verdict; `None` when no judge is configured or it failed.
    pub acc: Option<bool>,
    pub error: Option<String>,
    pub judge_error: Option<String>,
    /// Whether the first uncertainty estimate exceeded the threshold.
    pub inquired: bool,
    pub rounds: usize,
    pub transcript: Option<serde_json::Value>,
}

impl MethodOutcome {
    pub(crate) fn failed(method: Method, error: impl Into<String>) -> Self {
        Self {
            method,
            prediction: None,
            em: None,
            f1: None,
            acc: None,
            error: Some(error.into()),
            judge_error: None,
            inquired: false,
            rounds: 0,
            transcript: None,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    /// Facts as shown to the pseudo-user after masking.
    pub shown_facts: Vec<String>,
    pub methods: Vec<MethodOutcome>,
    /// Pairwise verdict with the inquiry answer as A and the direct answer as B.
    pub pairwise: Option<PairwiseVerdict>,
}

impl RecordOutcome {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Aggregate scores of one method. Metrics are fractions in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    pub label: String,
    pub evaluated: usize,
    pub failures: usize,
    pub em: f64,
    pub f1: f64,
    pub acc: Option<f64>,
    pub judged: usize,
    pub judge_failures: usize,
    pub inquiries: usize,
}

impl MethodRow {
    pub(crate) fn aggregate(method: Method, records: &[RecordOutcome]) -> Self {
        let outcomes: Vec<&MethodOutcome> = records.iter().filter_map(|r| r.outcome(method)).collect();
        let ok: Vec<&&MethodOutcome> = outcomes.iter().filter(|o| o.succeeded()).collect();
        let mean = |xs: Vec<f64>| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
        let verdicts: Vec<bool> = ok.iter().filter_map(|o| o.acc).collect();
        let judge_failures = ok.iter().filter(|o| o.judge_error.is_some()).count();
        Self {
            method,
            label: method.label().to_string(),
            evaluated: ok.len(),
            failures: outcomes.len() - ok.len(),
            em: mean(ok.iter().map(|o| f64::from(o.em.unwrap_or(0))).collect()),
            f1: mean(ok.iter().map(|o| o.f1.unwrap_or(0.0)).collect()),
            acc: (!verdicts.is_empty() || judge_failures > 0)
                .then(|| mean(verdicts.iter().map(|v| f64::from(u8::from(*v))).collect())),
            judged: verdicts.len(),
            judge_failures,
            inquiries: ok.iter().filter(|o| o.inquired).count(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseSummary {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: serde_json::Value,
    pub rows: Vec<MethodRow>,
    pub records: Vec<RecordOutcome>,
    pub pairwise: Option<PairwiseSummary>,
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

impl ExperimentReport {
    pub fn row(&self, method: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// Plain-text table with EM, F1 and Acc per method, in percent.
    pub fn render_table(&self) -> String {
        let mut out = format!("{:<12}{:>8}{:>8}{:>8}{:>6}{:>6}\n", "Method", "EM", "F1", "Acc", "n", "fail");
        for r in &self.rows {
            let acc = r.acc.map(pct).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<12}{:>8}{:>8}{:>8}{:>6}{:>6}",
                r.label,
                pct(r.em),
                pct(r.f1),
                acc,
                r.evaluated,
                r.failures
            );
        }
        if let Some(p) = &self.pairwise {
            let _ = writeln!(
                out,
                "pairwise (inquiry vs direct): win {} / tie {} / lose {} ({} failed)",
                p.wins, p.ties, p.losses, p.failures
            );
        }
        out
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub m_select: usize,
    pub strategy: Strategy,
    pub mask_rate: f64,
    pub inquiry_triggers: usize,
    pub methods: Vec<MethodRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: serde_json::Value,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    pub fn render_table(&self) -> String {
        let mut out = format!("{:>8}{:>4}{:>11}{:>7}{:>10}", "delta", "M", "strategy", "mask", "triggers");
        if let Some(first) = self.rows.first() {
            for m in &first.methods {
                let _ = write!(out, "{:>16}", format!("{} EM/F1", m.label));
            }
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{:>8}{:>4}{:>11}{:>7}{:>10}",
                r.delta,
                r.m_select,
                r.strategy.to_string(),
                r.mask_rate,
                r.inquiry_triggers
            );
            for m in &r.methods {
                let _ = write!(out, "{:>16}", format!("{}/{}", pct(m.em), pct(m.f1)));
            }
            out.push('\n');
        }
        out
    }
}
