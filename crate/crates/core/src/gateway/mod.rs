//! Completion requests, replay caching and provider dispatch.
//!
//! A [`Gateway`] runs under one [`Policy`]. `Replay` answers only from the
//! [`ReplayCache`] and never constructs a provider. `Record` answers from the
//! cache when it can and otherwise calls the provider, storing the response
//! before returning it. `Live` always calls the provider.

mod cache;
mod provider;
mod stitch;

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheRecord, ReplayCache};
pub use provider::{CompletionProvider, FnProvider, HttpProvider, ENV_API_KEY, ENV_BASE_URL, ENV_MODEL};
pub use stitch::{stitch_sql, StitchedSql};

pub const DEFAULT_MAX_TOKENS: u32 = 256;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

pub fn default_stop_sequences() -> Vec<String> {
    ["Question:", "\n\n", ";"].iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no cached response for fingerprint {fingerprint}")]
    CacheMiss { fingerprint: String },
    #[error("provider error: {message}")]
    Provider {
        message: String,
        retryable: bool,
        retry_after: Option<Duration>,
    },
    #[error("rate limited by provider")]
    RateLimited { retry_after: Option<Duration> },
    #[error("missing provider configuration: {0}")]
    MissingCredentials(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed cache record at {path}:{line}: {message}")]
    CacheFormat { path: String, line: usize, message: String },
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GatewayError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub stop_sequences: Vec<String>,
    pub max_tokens: u32,
    pub temperature: f64,
    pub model_name: String,
}

impl CompletionRequest {
    /// A request with the default decoding settings.
    pub fn new(prompt: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            stop_sequences: default_stop_sequences(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: 0.0,
            model_name: model_name.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(GatewayError::InvalidRequest(format!("bad temperature {}", self.temperature)));
        }
        Ok(())
    }

    /// Hex SHA-256 of the request's canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub provider_latency_ms: u64,
}

impl CompletionResponse {
    /// Cuts `text` at the first stop sequence, as a provider should have.
    pub fn truncate_at_stops(mut self, stops: &[String]) -> Self {
        if let Some(cut) = stops.iter().filter(|s| !s.is_empty()).filter_map(|s| self.text.find(s.as_str())).min() {
            self.text.truncate(cut);
            self.finish_reason = FinishReason::Stop;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Live,
    Record,
    Replay,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Live => "live",
            Policy::Record => "record",
            Policy::Replay => "replay",
        })
    }
}

impl FromStr for Policy {
    type Err = GatewayError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(Policy::Live),
            "record" => Ok(Policy::Record),
            "replay" => Ok(Policy::Replay),
            _ => Err(GatewayError::InvalidRequest(format!("unknown policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32, hint: Option<Duration>) -> Duration {
        let backoff = self.base_delay.saturating_mul(1u32 << attempt.min(16)).min(self.max_delay);
        hint.map_or(backoff, |h| h.max(backoff))
    }
}

/// Counting semaphore bounding in-flight provider calls.
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().expect("permit lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("permit lock");
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("permit lock") += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    policy: Policy,
    cache: Option<Arc<ReplayCache>>,
    provider: Option<Arc<dyn CompletionProvider>>,
    permits: Permits,
    retry: RetryPolicy,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("policy", &self.policy)
            .field("has_cache", &self.cache.is_some())
            .field("has_provider", &self.provider.is_some())
            .finish()
    }
}

impl Gateway {
    /// Replay-only gateway; it holds no provider at all.
    pub fn replay(cache: Arc<ReplayCache>) -> Self {
        Self::build(Policy::Replay, Some(cache), None)
    }

    pub fn record(cache: Arc<ReplayCache>, provider: Arc<dyn CompletionProvider>) -> Self {
        Self::build(Policy::Record, Some(cache), Some(provider))
    }

    pub fn live(provider: Arc<dyn CompletionProvider>) -> Self {
        Self::build(Policy::Live, None, Some(provider))
    }

    fn build(policy: Policy, cache: Option<Arc<ReplayCache>>, provider: Option<Arc<dyn CompletionProvider>>) -> Self {
        Self {
            policy,
            cache,
            provider,
            permits: Permits {
                free: Mutex::new(DEFAULT_MAX_IN_FLIGHT),
                cv: Condvar::new(),
            },
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.permits = Permits {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        };
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn cache(&self) -> Option<&Arc<ReplayCache>> {
        self.cache.as_ref()
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        request.validate()?;
        match self.policy {
            Policy::Replay => {
                let cache = self.cache.as_ref().expect("replay gateway has a cache");
                cache.get(&request.fingerprint()).ok_or_else(|| GatewayError::CacheMiss {
                    fingerprint: request.fingerprint(),
                })
            }
            Policy::Record => {
                let cache = self.cache.as_ref().expect("record gateway has a cache");
                if let Some(hit) = cache.get(&request.fingerprint()) {
                    return Ok(hit);
                }
                let response = self.call_provider(request)?;
                cache.insert(request, &response)?;
                Ok(response)
            }
            Policy::Live => self.call_provider(request),
        }
    }

    fn call_provider(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        let provider = self.provider.as_ref().expect("live and record gateways have a provider");
        let mut attempt = 0;
        loop {
            let outcome = {
                let _permit = self.permits.acquire();
                provider.complete(request)
            };
            let hint = match &outcome {
                Ok(r) => return Ok(r.clone().truncate_at_stops(&request.stop_sequences)),
                Err(GatewayError::RateLimited { retry_after }) => *retry_after,
                Err(GatewayError::Provider {
                    retryable: true,
                    retry_after,
                    ..
                }) => *retry_after,
                Err(_) => return outcome,
            };
            if attempt >= self.retry.max_retries {
                return outcome;
            }
            let wait = self.retry.delay(attempt, hint);
            log::warn!("provider call failed, retrying in {wait:?}");
            thread::sleep(wait);
            attempt += 1;
        }
    }
}
