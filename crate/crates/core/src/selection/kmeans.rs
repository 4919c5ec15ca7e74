//! Seeded k-means with k-means++ initialization and Lloyd iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SelectionError;
use crate::model::Embedding;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    /// Stop once no centroid moves farther than this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from each point to its centroid.
    pub inertia: f64,
    /// Inertia after each Lloyd iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].to_vec()];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();

    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, d) in dist.iter().enumerate() {
                if *d <= 0.0 {
                    continue;
                }
                if target < *d {
                    pick = Some(i);
                    break;
                }
                target -= d;
            }
            // Rounding can leave `target` past the last positive weight.
            pick.unwrap_or_else(|| dist.iter().rposition(|d| *d > 0.0).expect("positive total"))
        } else {
            // All remaining points coincide with a centroid.
            (0..n).find(|i| !chosen[*i]).expect("k <= n")
        };
        chosen[next] = true;
        centroids.push(points[next].to_vec());
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(p, centroids.last().expect("just pushed")));
        }
    }
    centroids
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(points: &[&[f64]], labels: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for l in labels.iter() {
            sizes[*l] += 1;
        }
        let Some(empty) = sizes.iter().position(|s| *s == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|i| sizes[labels[*i]] > 1)
            .max_by(|a, b| {
                let da = sq_dist(points[*a], &centroids[labels[*a]]);
                let db = sq_dist(points[*b], &centroids[labels[*b]]);
                da.total_cmp(&db).then(b.cmp(a))
            })
            .expect("n >= k guarantees a cluster with more than one member");
        labels[donor] = empty;
        centroids[empty] = points[donor].to_vec();
    }
}

fn inertia(points: &[&[f64]], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, l)| sq_dist(p, &centroids[*l]))
        .sum()
}

/// Partitions `embeddings` into `k` clusters. Deterministic for a fixed
/// input, `k` and `seed`.
pub fn kmeans(
    embeddings: &[Embedding],
    k: usize,
    seed: u64,
    options: &KMeansOptions,
) -> Result<ClusterAssignment, SelectionError> {
    let n = embeddings.len();
    if k == 0 {
        return Err(SelectionError::EmptySelection);
    }
    if n < k {
        return Err(SelectionError::TooFewPoints { needed: k, got: n });
    }
    let dim = embeddings[0].dim();
    if let Some(bad) = embeddings.iter().find(|e| e.dim() != dim) {
        return Err(SelectionError::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    let points: Vec<&[f64]> = embeddings.iter().map(|e| e.values()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(&points, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        for (i, p) in points.iter().enumerate() {
            labels[i] = nearest(p, &centroids).0;
        }
        repair_empty(&points, &mut labels, &mut centroids);

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, l) in points.iter().zip(&labels) {
            counts[*l] += 1;
            for (s, v) in sums[*l].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            let updated: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            shift = shift.max(sq_dist(&updated, &centroids[j]).sqrt());
            centroids[j] = updated;
        }
        history.push(inertia(&points, &labels, &centroids));
        if shift < options.tolerance {
            break;
        }
    }

    Ok(ClusterAssignment {
        inertia: *history.last().expect("at least one iteration"),
        labels,
        centroids,
        inertia_history: history,
        iterations,
    })
}
