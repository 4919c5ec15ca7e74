//! Choosing which M of the N candidate clarifying questions to surface.

mod kmeans;

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{ClarifyingQuestion, Embedding, Strategy};

pub use kmeans::{kmeans, ClusterAssignment, KMeansOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("cannot take the cosine of a zero vector")]
    ZeroVector,
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {needed} points for {needed} clusters, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("candidate {0} has no embedding")]
    MissingEmbedding(usize),
    #[error("similarity selection needs a query embedding")]
    MissingQueryEmbedding,
    #[error("selection size must be at least 1")]
    EmptySelection,
}

const ZERO_NORM: f64 = 1e-12;

pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, SelectionError> {
    if a.dim() != b.dim() {
        return Err(SelectionError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na < ZERO_NORM || nb < ZERO_NORM {
        return Err(SelectionError::ZeroVector);
    }
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn embedding_of(q: &ClarifyingQuestion) -> Result<&Embedding, SelectionError> {
    q.embedding
        .as_ref()
        .ok_or(SelectionError::MissingEmbedding(q.origin_index))
}

/// The `m` candidates most cosine-similar to the query, most similar first.
/// Ties go to the lower `origin_index`.
pub fn select_similarity(
    candidates: &[ClarifyingQuestion],
    query_embedding: &Embedding,
    m: usize,
) -> Result<Vec<ClarifyingQuestion>, SelectionError> {
    if m == 0 {
        return Err(SelectionError::EmptySelection);
    }
    let mut scored = candidates
        .iter()
        .map(|q| Ok((cosine_similarity(embedding_of(q)?, query_embedding)?, q)))
        .collect::<Result<Vec<_>, SelectionError>>()?;
    scored.sort_by(|(sa, qa), (sb, qb)| {
        sb.partial_cmp(sa)
            .unwrap_or(Ordering::Equal)
            .then(qa.origin_index.cmp(&qb.origin_index))
    });
    Ok(scored.into_iter().take(m).map(|(_, q)| q.clone()).collect())
}

/// Clusters the candidates into `min(m, N)` groups and draws one member of
/// each cluster at random; output is ordered by cluster label.
pub fn select_diversity(
    candidates: &[ClarifyingQuestion],
    m: usize,
    seed: u64,
) -> Result<Vec<ClarifyingQuestion>, SelectionError> {
    if m == 0 {
        return Err(SelectionError::EmptySelection);
    }
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let embeddings = candidates
        .iter()
        .map(|q| embedding_of(q).cloned())
        .collect::<Result<Vec<_>, _>>()?;
    let k = m.min(candidates.len());
    let assignment = kmeans(&embeddings, k, seed, &KMeansOptions::default())?;
    let mut picked = Vec::with_capacity(k);
    for label in 0..k {
        let members: Vec<usize> = assignment
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == label)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, label as u64));
        let choice = rand::seq::SliceRandom::choose(members.as_slice(), &mut rng).expect("non-empty cluster");
        picked.push(candidates[*choice].clone());
    }
    Ok(picked)
}

/// Uniform sample of `min(m, N)` candidates without replacement, in their
/// original order.
pub fn select_random(
    candidates: &[ClarifyingQuestion],
    m: usize,
    seed: u64,
) -> Result<Vec<ClarifyingQuestion>, SelectionError> {
    if m == 0 {
        return Err(SelectionError::EmptySelection);
    }
    let n = candidates.len();
    if m >= n {
        return Ok(candidates.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| candidates[i].clone()).collect())
}

/// Dispatches to the configured strategy. `query_embedding` is only used by
/// the similarity strategy.
pub fn select(
    strategy: Strategy,
    candidates: &[ClarifyingQuestion],
    query_embedding: Option<&Embedding>,
    m: usize,
    seed: u64,
) -> Result<Vec<ClarifyingQuestion>, SelectionError> {
    match strategy {
        Strategy::Similarity => {
            let q = query_embedding.ok_or(SelectionError::MissingQueryEmbedding)?;
            select_similarity(candidates, q, m)
        }
        Strategy::Diversity => select_diversity(candidates, m, seed),
        Strategy::Random => select_random(candidates, m, seed),
    }
}

/// SplitMix64 finalizer over `seed` and a stream index.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
