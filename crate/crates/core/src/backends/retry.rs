use std::future::Future;
use std::time::Duration;

use super::BackendError;

/// Bounded retry with a fixed backoff schedule.
///
/// Only transport failures, timeouts, 5xx and 429 responses are retried;
/// [`BackendError::Rejected`] is returned immediately.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before retry `i` (the last entry repeats if the schedule is short).
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff: vec![
                Duration::from_millis(500),
                Duration::from_secs(1),
                Duration::from_secs(2),
            ],
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_attempts: 1,
            backoff: Vec::new(),
        }
    }

    /// Same attempt budget with every delay scaled down; handy in tests.
    pub fn with_backoff(mut self, backoff: Vec<Duration>) -> Self {
        self.backoff = backoff;
        self
    }

    fn delay(&self, retry: usize) -> Duration {
        self.backoff
            .get(retry)
            .or_else(|| self.backoff.last())
            .copied()
            .unwrap_or_default()
    }

    pub async fn run<T, F, Fut>(&self, mut op: F) -> Result<T, BackendError>
    where
        F: FnMut() -> Fut,
        Fut: Future<Output = Result<T, BackendError>>,
    {
        let max = self.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match op().await {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < max => {
                    tracing::debug!(attempt, error = %e, "retrying backend call");
                    tokio::time::sleep(self.delay(attempt as usize - 1)).await;
                }
                Err(e) => return Err(with_attempts(e, attempt)),
            }
        }
    }
}

fn with_attempts(e: BackendError, attempts: u32) -> BackendError {
    match e {
        BackendError::Unavailable { message, .. } => BackendError::Unavailable { attempts, message },
        BackendError::Timeout { .. } => BackendError::Timeout { attempts },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn fast() -> RetryPolicy {
        RetryPolicy::default().with_backoff(vec![Duration::from_millis(1)])
    }

    #[tokio::test]
    async fn gives_up_after_budget() {
        let calls = AtomicU32::new(0);
        let r: Result<(), _> = fast()
            .run(|| async {
                calls.fetch_add(1, Ordering::SeqCst);
                Err(BackendError::Unavailable {
                    attempts: 1,
                    message: "down".into(),
                })
            })
            .await;
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        assert_eq!(
            r,
            Err(BackendError::Unavailable {
                attempts: 3,
                message: "down".into()
            })
        );
    }

    #[tokio::test]
    async fn never_retries_rejections() {
        let calls = AtomicU32::new(0);
        let r: Result<(), _> = fast()
            .run(|| async {
                calls.fetch_add(1, Ordering::SeqCst);
                Err(BackendError::Rejected {
                    status: 401,
                    message: "bad key".into(),
                })
            })
            .await;
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert!(matches!(r, Err(BackendError::Rejected { status: 401, .. })));
    }

    #[tokio::test]
    async fn recovers_on_second_attempt() {
        let calls = AtomicU32::new(0);
        let r = fast()
            .run(|| async {
                if calls.fetch_add(1, Ordering::SeqCst) == 0 {
                    Err(BackendError::Timeout { attempts: 1 })
                } else {
                    Ok(7)
                }
            })
            .await;
        assert_eq!(r, Ok(7));
    }

    #[test]
    fn schedule_repeats_last_delay() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(0), Duration::from_millis(500));
        assert_eq!(p.delay(2), Duration::from_secs(2));
        assert_eq!(p.delay(9), Duration::from_secs(2));
    }
}
