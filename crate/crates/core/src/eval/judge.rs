//! LLM-as-judge scoring: single-answer correctness and pairwise preference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, ChatBackend, ChatRequest};
use crate::engine::PromptTemplateSet;

/// Parses a correctness verdict. `None` means the reply was neither
/// CORRECT nor INCORRECT.
pub fn parse_verdict(text: &str) -> Option<bool> {
    let word: String = text
        .trim()
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_ascii_uppercase();
    match word.as_str() {
        "CORRECT" => Some(true),
        "INCORRECT" => Some(false),
        _ => None,
    }
}

/// Asks the judge whether `pred` answers `question` given the gold answers.
/// Unparseable replies count as incorrect and are logged.
pub async fn judge_accuracy(
    judge: &dyn ChatBackend,
    templates: &PromptTemplateSet,
    question: &str,
    pred: &str,
    golds: &[String],
) -> Result<bool, BackendError> {
    let gold = golds.join(" | ");
    let prompt = templates
        .judge_accuracy
        .render(&[("question", question), ("prediction", pred), ("gold", &gold)])
        .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
    let resp = judge.chat_complete(&ChatRequest::user(prompt)).await?;
    Ok(parse_verdict(&resp.text).unwrap_or_else(|| {
        tracing::warn!(reply = %resp.text, "unparseable judge verdict counted as INCORRECT");
        false
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairwiseVerdict {
    A,
    B,
    Tie,
}

pub fn parse_pairwise_verdict(text: &str) -> Option<PairwiseVerdict> {
    let t = text.trim().trim_matches(|c: char| matches!(c, '[' | ']' | '"' | '\'' | '.' | '*'));
    match t.to_ascii_uppercase().as_str() {
        "A" => Some(PairwiseVerdict::A),
        "B" => Some(PairwiseVerdict::B),
        "TIE" | "C" => Some(PairwiseVerdict::Tie),
        _ => None,
    }
}

/// Whether `seed` presents the answers in swapped order.
pub fn presentation_swapped(seed: u64) -> bool {
    ChaCha8Rng::seed_from_u64(seed).gen_bool(0.5)
}

/// Compares two answers with the presentation order randomized by `seed`,
/// and maps the verdict back onto the caller's labels. Unparseable replies
/// count as a tie.
pub async fn pairwise_judge(
    judge: &dyn ChatBackend,
    templates: &PromptTemplateSet,
    question: &str,
    answer_a: &str,
    answer_b: &str,
    seed: u64,
) -> Result<PairwiseVerdict, BackendError> {
    let swapped = presentation_swapped(seed);
    let (first, second) = if swapped { (answer_b, answer_a) } else { (answer_a, answer_b) };
    let prompt = templates
        .judge_pairwise
        .render(&[("question", question), ("answer_a", first), ("answer_b", second)])
        .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
    let resp = judge.chat_complete(&ChatRequest::user(prompt)).await?;
    let verdict = parse_pairwise_verdict(&resp.text).unwrap_or_else(|| {
        tracing::warn!(reply = %resp.text, "unparseable pairwise verdict counted as TIE");
        PairwiseVerdict::Tie
    });
    Ok(match (verdict, swapped) {
        (PairwiseVerdict::A, true) => PairwiseVerdict::B,
        (PairwiseVerdict::B, true) => PairwiseVerdict::A,
        (v, _) => v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ScriptedChat;

    fn seed_with(swap: bool) -> u64 {
        (0..).find(|s| presentation_swapped(*s) == swap).unwrap()
    }

    #[test]
    fn verdict_parsing() {
        assert_eq!(parse_verdict("CORRECT"), Some(true));
        assert_eq!(parse_verdict("  incorrect."), Some(false));
        assert_eq!(parse_verdict("**CORRECT**"), Some(true));
        assert_eq!(parse_verdict("It depends"), None);
        assert_eq!(parse_pairwise_verdict("[[B]]"), Some(PairwiseVerdict::B));
        assert_eq!(parse_pairwise_verdict("tie"), Some(PairwiseVerdict::Tie));
    }

    #[tokio::test]
    async fn accuracy_judge() {
        let t = PromptTemplateSet::default();
        let golds = vec!["Paris".to_string()];
        assert!(judge_accuracy(&ScriptedChat::constant("CORRECT"), &t, "q", "Paris", &golds).await.unwrap());
        assert!(!judge_accuracy(&ScriptedChat::constant("INCORRECT"), &t, "q", "x", &golds).await.unwrap());
        assert!(!judge_accuracy(&ScriptedChat::constant("¯\\_(ツ)_/¯"), &t, "q", "x", &golds).await.unwrap());
    }

    #[tokio::test]
    async fn pairwise_unswaps() {
        let t = PromptTemplateSet::default();
        let judge = ScriptedChat::constant("A");
        let v = pairwise_judge(&judge, &t, "q", "one", "two", seed_with(false)).await.unwrap();
        assert_eq!(v, PairwiseVerdict::A);
        let v = pairwise_judge(&judge, &t, "q", "one", "two", seed_with(true)).await.unwrap();
        assert_eq!(v, PairwiseVerdict::B);
        let prompt = judge.request_log()[1].last_user_content().to_string();
        assert!(prompt.find("two").unwrap() < prompt.find("one").unwrap());
        let v = pairwise_judge(&ScriptedChat::constant("TIE"), &t, "q", "one", "two", 3).await.unwrap();
        assert_eq!(v, PairwiseVerdict::Tie);
    }
}
