use std::future::Future;
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Capped exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            ..Default::default()
        }
    }

    /// Delay before retry number `retry` (0-based). Never decreases with `retry`.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(31)).unwrap_or(u32::MAX);
        self.base_delay
            .checked_mul(factor)
            .unwrap_or(self.max_delay)
            .min(self.max_delay)
    }

    pub fn delays(&self) -> impl Iterator<Item = Duration> + '_ {
        (0..self.max_retries).map(|r| self.delay(r))
    }
}

/// Outcome of a single attempt.
pub enum Attempt<T, E> {
    Done(T),
    /// Worth retrying: transport failures, timeouts, overload.
    Transient(E),
    Permanent(E),
}

/// Runs `op` until it succeeds, fails permanently, or the retries run out.
pub async fn with_retries<T, E, F, Fut>(policy: &RetryPolicy, mut op: F) -> Result<T, E>
where
    F: FnMut() -> Fut,
    Fut: Future<Output = Attempt<T, E>>,
{
    let mut retry = 0;
    loop {
        match op().await {
            Attempt::Done(v) => return Ok(v),
            Attempt::Permanent(e) => return Err(e),
            Attempt::Transient(e) => {
                if retry >= policy.max_retries {
                    return Err(e);
                }
                let delay = policy.delay(retry);
                tracing::debug!(retry, ?delay, "retrying after transient backend failure");
                tokio::time::sleep(delay).await;
                retry += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn quick(max_retries: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(4),
        }
    }

    #[tokio::test]
    async fn stops_after_max_retries() {
        let attempts = AtomicU32::new(0);
        let out: Result<(), &str> = with_retries(&quick(2), || async {
            attempts.fetch_add(1, Ordering::SeqCst);
            Attempt::Transient("down")
        })
        .await;
        assert_eq!(out, Err("down"));
        assert_eq!(attempts.load(Ordering::SeqCst), 3);
    }

    #[tokio::test]
    async fn permanent_errors_are_not_retried() {
        let attempts = AtomicU32::new(0);
        let out: Result<(), &str> = with_retries(&quick(5), || async {
            attempts.fetch_add(1, Ordering::SeqCst);
            Attempt::Permanent("bad request")
        })
        .await;
        assert!(out.is_err());
        assert_eq!(attempts.load(Ordering::SeqCst), 1);
    }

    #[tokio::test]
    async fn recovers_after_transient_failure() {
        let attempts = AtomicU32::new(0);
        let out: Result<u32, &str> = with_retries(&quick(3), || async {
            let n = attempts.fetch_add(1, Ordering::SeqCst);
            if n < 2 {
                Attempt::Transient("flaky")
            } else {
                Attempt::Done(n)
            }
        })
        .await;
        assert_eq!(out, Ok(2));
    }

    proptest! {
        #[test]
        fn delays_never_decrease(max_retries in 0u32..40, base in 1u64..1000, cap in 1u64..100_000) {
            let policy = RetryPolicy {
                max_retries,
                base_delay: Duration::from_millis(base),
                max_delay: Duration::from_millis(cap),
            };
            let delays: Vec<_> = policy.delays().collect();
            prop_assert_eq!(delays.len(), max_retries as usize);
            prop_assert!(delays.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(delays.iter().all(|d| *d <= policy.max_delay));
        }
    }
}
