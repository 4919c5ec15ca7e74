use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const MASK_TOKEN: &str = "[MASKED]";

/// Replaces `round(rate · n)` randomly chosen facts with [`MASK_TOKEN`],
/// keeping order. Rates outside [0, 1] are clamped; NaN counts as 0.
pub fn mask_context(facts: &[String], rate: f64, seed: u64) -> Vec<String> {
    let n = facts.len();
    let rate = if rate.is_nan() { 0.0 } else { rate.clamp(0.0, 1.0) };
    let k = ((rate * n as f64).round() as usize).min(n);
    let mut out = facts.to_vec();
    if k == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in rand::seq::index::sample(&mut rng, n, k) {
        out[i] = MASK_TOKEN.to_string();
    }
    out
}
