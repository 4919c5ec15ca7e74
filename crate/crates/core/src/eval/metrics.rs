//! Exact match and token F1 over normalized answers, following the usual
//! extractive-QA convention.

use std::collections::HashMap;

/// Lowercase, drop ASCII punctuation, drop the articles "a", "an" and
/// "the", and collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    no_punct
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Maps "true"/"false" onto "yes"/"no" so boolean answers compare equal
/// regardless of which spelling the model used.
pub fn canonical_boolean(text: &str) -> String {
    match normalize_answer(text).as_str() {
        "true" | "yes" => "yes".to_string(),
        "false" | "no" => "no".to_string(),
        other => other.to_string(),
    }
}

/// 1 when the normalized prediction equals any normalized gold answer.
pub fn exact_match(pred: &str, golds: &[String]) -> u8 {
    let p = normalize_answer(pred);
    u8::from(golds.iter().any(|g| normalize_answer(g) == p))
}

fn token_f1(pred: &str, gold: &str) -> f64 {
    let p = normalize_answer(pred);
    let g = normalize_answer(gold);
    let pt: Vec<&str> = p.split_whitespace().collect();
    let gt: Vec<&str> = g.split_whitespace().collect();
    if pt.is_empty() || gt.is_empty() {
        return if pt.is_empty() && gt.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gt {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &pt {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pt.len() as f64;
    let recall = common as f64 / gt.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Maximum token-level F1 of the prediction against each gold answer.
pub fn f1_score(pred: &str, golds: &[String]) -> f64 {
    golds.iter().map(|g| token_f1(pred, g)).fold(0.0, f64::max)
}
