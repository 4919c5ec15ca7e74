//! Pseudo-user: a chat model that holds the withheld supporting facts and
//! answers clarifying questions in place of a human.

use super::{BackendError, ChatBackend, ChatRequest};
use crate::model::{ClarifyingQuestion, FeedbackItem};

pub const UNKNOWN_ANSWER: &str = "I don't know";

/// System prompt given to the pseudo-user. Contains the facts verbatim.
pub fn oracle_system_prompt(facts: &[String]) -> String {
    let mut block = String::new();
    for fact in facts {
        block.push_str("- ");
        block.push_str(fact);
        block.push('\n');
    }
    format!(
        "You are a user who asked an assistant a question. The assistant will ask you \
         clarifying questions. Answer each one briefly, using only the facts below.\n\n\
         Facts:\n{block}\n\
         If the facts do not contain the answer, reply exactly \"{UNKNOWN_ANSWER}\". \
         Do not add information beyond the facts."
    )
}

/// Asks the oracle each question in turn. A question whose call fails is
/// answered with "I don't know"; the error is only returned when every
/// question failed.
pub async fn pseudo_user_answer(
    oracle: &dyn ChatBackend,
    questions: &[ClarifyingQuestion],
    supporting_facts: &[String],
) -> Result<Vec<FeedbackItem>, BackendError> {
    if questions.is_empty() {
        return Err(BackendError::InvalidRequest("no questions for the pseudo-user".into()));
    }
    let system = oracle_system_prompt(supporting_facts);
    let mut out = Vec::with_capacity(questions.len());
    let mut last_err = None;
    let mut failures = 0;
    for q in questions {
        let req = ChatRequest::user(q.text.clone()).with_system(system.clone());
        let answer = match oracle.chat_complete(&req).await {
            Ok(resp) => resp.text.trim().to_string(),
            Err(e) => {
                tracing::warn!(question = %q.text, error = %e, "pseudo-user call failed");
                last_err = Some(e);
                failures += 1;
                UNKNOWN_ANSWER.to_string()
            }
        };
        out.push(FeedbackItem::new(q.clone(), answer));
    }
    match last_err {
        Some(e) if failures == questions.len() => Err(e),
        _ => Ok(out),
    }
}
