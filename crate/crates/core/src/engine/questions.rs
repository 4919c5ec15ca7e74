use crate::model::ClarifyingQuestion;

/// Strips a list marker ("1.", "1)", "Q1:", "-", "*", "•") from the start
/// of `line`, returning the remainder when a marker was present.
fn strip_marker(line: &str) -> Option<&str> {
    if let Some(rest) = line.strip_prefix(['-', '*', '•']) {
        return rest.starts_with(char::is_whitespace).then(|| rest.trim_start());
    }

    let (body, q_prefixed) = match line.strip_prefix(['Q', 'q']) {
        Some(r) if r.starts_with(|c: char| c.is_ascii_digit()) => (r, true),
        _ => (line, false),
    };
    let digits = body.find(|c: char| !c.is_ascii_digit()).unwrap_or(body.len());
    if digits == 0 {
        return None;
    }
    let after = &body[digits..];
    let punct: &[char] = if q_prefixed { &['.', ')', ':'] } else { &['.', ')'] };
    let rest = after.strip_prefix(punct)?;
    // "1.5 million?" is a number, not a marker.
    if rest.starts_with(|c: char| c.is_ascii_digit()) {
        return None;
    }
    Some(rest.trim_start())
}

/// Extracts clarifying questions from raw model output. Numbered and
/// bulleted lines are accepted with or without a trailing "?"; unmarked
/// lines are kept only if they end in "?".
pub fn parse_question_list(raw: &str) -> Vec<ClarifyingQuestion> {
    let mut out = Vec::new();
    for line in raw.lines() {
        let mut line = line.trim();
        // Markdown bold around a whole item: "**1. Which one?**".
        if let Some(inner) = line.strip_prefix("**") {
            line = inner.strip_suffix("**").unwrap_or(inner).trim();
        }
        if line.is_empty() {
            continue;
        }
        let text = match strip_marker(line) {
            Some(rest) => rest,
            None if line.ends_with('?') => line,
            None => continue,
        };
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        if let Ok(q) = ClarifyingQuestion::new(text, out.len()) {
            out.push(q);
        }
    }
    out
}
