//! Uncertainty estimation from the spread of sampled answer embeddings.
//!
//! The score is the mean over embedding dimensions of the unbiased sample
//! variance of that dimension across the T answers:
//!
//! ```text
//! Var(A) = 1/K · Σ_k [ 1/(T−1) · Σ_i (E_i[k] − mean_k)² ]
//! ```

use futures::future::join_all;
use thiserror::Error;

use crate::backends::{BackendError, ChatBackend, ChatRequest};
use crate::model::{AnswerSample, Embedding};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UncertaintyError {
    #[error("need at least 2 embeddings to estimate variance, got {0}")]
    TooFewSamples(usize),
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("answer sampling failed on call {index}: {source}")]
    SamplingFailed {
        index: usize,
        #[source]
        source: BackendError,
    },
}

/// Mean per-dimension unbiased sample variance of `embeddings`.
pub fn answer_variance(embeddings: &[Embedding]) -> Result<f64, UncertaintyError> {
    let t = embeddings.len();
    if t < 2 {
        return Err(UncertaintyError::TooFewSamples(t));
    }
    let k = embeddings[0].dim();
    if let Some(bad) = embeddings.iter().find(|e| e.dim() != k) {
        return Err(UncertaintyError::DimensionMismatch {
            expected: k,
            found: bad.dim(),
        });
    }

    // Values are shifted by the first sample before the two passes; identical
    // samples then give exactly zero and large offsets lose no precision.
    let origin = embeddings[0].values();
    let mut mean = vec![0.0; k];
    for e in embeddings {
        for ((m, v), o) in mean.iter_mut().zip(e.values()).zip(origin) {
            *m += v - o;
        }
    }
    for m in &mut mean {
        *m /= t as f64;
    }

    let mut sum_sq = vec![0.0; k];
    for e in embeddings {
        for (((s, v), o), m) in sum_sq.iter_mut().zip(e.values()).zip(origin).zip(&mean) {
            let d = (v - o) - m;
            *s += d * d;
        }
    }
    let denom = (t - 1) as f64;
    let total: f64 = sum_sq.iter().map(|s| s / denom).sum();
    Ok(total / k as f64)
}

/// Whether the engine should ask clarifying questions: only when the
/// variance is strictly above the threshold.
pub fn should_inquire(variance: f64, delta: f64) -> bool {
    variance > delta
}

/// Issues `t` independent copies of `request` concurrently. Indices follow
/// issue order. Any failure fails the whole batch.
pub async fn sample_answers(
    chat: &dyn ChatBackend,
    request: &ChatRequest,
    t: usize,
) -> Result<Vec<AnswerSample>, UncertaintyError> {
    let calls = (0..t).map(|_| chat.chat_complete(request));
    let results = join_all(calls).await;
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| match r {
            Ok(resp) => Ok(AnswerSample {
                text: resp.text,
                index,
                embedding: None,
            }),
            Err(source) => Err(UncertaintyError::SamplingFailed { index, source }),
        })
        .collect()
}
