use std::sync::Arc;
use std::time::Duration;

use super::{ChatClient, ChatRequest, GatewayError, GenerationRequest, ImageClient};

/// Exponential backoff: attempt `k` (1-based) that fails transiently waits
/// `base_delay * factor^(k-1)` before the next attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_delay: Duration::from_secs(1), factor: 2.0 }
    }
}

impl RetryPolicy {
    pub fn delay_after(&self, attempt: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(attempt.saturating_sub(1) as i32))
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Retries transient failures of the wrapped client.
pub struct Retrying<C> {
    inner: C,
    policy: RetryPolicy,
    sleeper: Sleeper,
}

impl<C> Retrying<C> {
    pub fn new(inner: C, policy: RetryPolicy) -> Self {
        Retrying { inner, policy, sleeper: Arc::new(std::thread::sleep) }
    }

    /// Replaces the sleep function (tests record delays instead of waiting).
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Arc::new(sleeper);
        self
    }

    fn run<T>(&self, mut call: impl FnMut() -> Result<T, GatewayError>) -> Result<T, GatewayError> {
        let attempts = self.policy.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match call() {
                Err(e) if e.is_transient() && attempt < attempts => {
                    let delay = self.policy.delay_after(attempt);
                    log::warn!("attempt {attempt}/{attempts} failed ({e}); retrying in {delay:?}");
                    (self.sleeper)(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

impl<C: ChatClient> ChatClient for Retrying<C> {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        self.run(|| self.inner.chat(request))
    }
}

impl<C: ImageClient> ImageClient for Retrying<C> {
    fn generate_image(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        self.run(|| self.inner.generate_image(request))
    }
}
