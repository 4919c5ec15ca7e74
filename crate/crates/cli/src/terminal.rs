use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use inquest_core::engine::ChannelError;
use inquest_core::{ClarifyingQuestion, FeedbackItem, UserChannel};

type Io = (Box<dyn BufRead + Send>, Box<dyn Write + Send>);

/// Asks clarifying questions on a terminal, one line per answer. An empty
/// line (or end of input) skips the question.
pub struct TerminalChannel {
    io: Arc<Mutex<Io>>,
}

impl TerminalChannel {
    pub fn new(input: Box<dyn BufRead + Send>, output: Box<dyn Write + Send>) -> Self {
        Self {
            io: Arc::new(Mutex::new((input, output))),
        }
    }

    pub fn stdio() -> Self {
        Self::new(Box::new(std::io::BufReader::new(std::io::stdin())), Box::new(std::io::stderr()))
    }
}

fn prompt(io: &mut Io, questions: &[String]) -> std::io::Result<Vec<String>> {
    let (input, output) = io;
    writeln!(output, "Some clarification would help (press Enter to skip a question):")?;
    let mut answers = Vec::with_capacity(questions.len());
    for (i, q) in questions.iter().enumerate() {
        write!(output, "  {}. {q}\n  > ", i + 1)?;
        output.flush()?;
        let mut line = String::new();
        input.read_line(&mut line)?;
        answers.push(line.trim().to_string());
    }
    Ok(answers)
}

#[async_trait]
impl UserChannel for TerminalChannel {
    async fn ask(&self, questions: &[ClarifyingQuestion]) -> Result<Vec<FeedbackItem>, ChannelError> {
        let io = self.io.clone();
        let texts: Vec<String> = questions.iter().map(|q| q.text.clone()).collect();
        let answers = tokio::task::spawn_blocking(move || {
            let mut guard = io.lock().map_err(|_| ChannelError::Other("terminal state poisoned".into()))?;
            prompt(&mut guard, &texts).map_err(|e| ChannelError::Other(e.to_string()))
        })
        .await
        .map_err(|e| ChannelError::Other(e.to_string()))??;
        Ok(questions
            .iter()
            .cloned()
            .zip(answers)
            .map(|(q, a)| FeedbackItem::new(q, a))
            .collect())
    }
}
