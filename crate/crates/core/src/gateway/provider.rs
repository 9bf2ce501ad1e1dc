//! Completion providers.

use std::env;
use std::fmt;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::json;

use super::{CompletionRequest, CompletionResponse, FinishReason, GatewayError, Result};

pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_BASE_URL: &str = "LLM_BASE_URL";
pub const ENV_MODEL: &str = "LLM_MODEL";

const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

pub trait CompletionProvider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse>;
}

/// Provider backed by a closure; handy for scripted and offline runs.
pub struct FnProvider<F>(F);

impl<F> FnProvider<F>
where
    F: Fn(&CompletionRequest) -> Result<CompletionResponse> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self(f)
    }
}

impl<F> CompletionProvider for FnProvider<F>
where
    F: Fn(&CompletionRequest) -> Result<CompletionResponse> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        (self.0)(request)
    }
}

/// Client for an OpenAI-compatible `POST {base_url}/completions` endpoint.
pub struct HttpProvider {
    client: Client,
    base_url: String,
    api_key: String,
}

impl fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpProvider").field("base_url", &self.base_url).finish_non_exhaustive()
    }
}

#[derive(Deserialize)]
struct ApiResponse {
    choices: Vec<ApiChoice>,
}

#[derive(Deserialize)]
struct ApiChoice {
    text: String,
    finish_reason: Option<String>,
}

impl HttpProvider {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Result<Self> {
        let client = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::Provider {
                message: e.to_string(),
                retryable: false,
                retry_after: None,
            })?;
        Ok(Self {
            client,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
        })
    }

    /// Reads `LLM_API_KEY` (required) and `LLM_BASE_URL` (optional).
    pub fn from_env() -> Result<Self> {
        let key = env::var(ENV_API_KEY).map_err(|_| GatewayError::MissingCredentials(format!("{ENV_API_KEY} is not set")))?;
        let base = env::var(ENV_BASE_URL).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
        Self::new(base, key)
    }
}

fn retry_after(headers: &reqwest::header::HeaderMap) -> Option<Duration> {
    headers
        .get(reqwest::header::RETRY_AFTER)?
        .to_str()
        .ok()?
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|s| s.is_finite() && *s >= 0.0)
        .map(Duration::from_secs_f64)
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        let body = json!({
            "model": request.model_name,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "stop": request.stop_sequences,
        });
        let started = Instant::now();
        let transport = |e: reqwest::Error| GatewayError::Provider {
            message: e.to_string(),
            retryable: e.is_timeout() || e.is_connect(),
            retry_after: None,
        };
        let resp = self
            .client
            .post(format!("{}/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(transport)?;
        let status = resp.status();
        let hint = retry_after(resp.headers());
        if status == StatusCode::TOO_MANY_REQUESTS {
            return Err(GatewayError::RateLimited { retry_after: hint });
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(GatewayError::Provider {
                message: format!("HTTP {status}: {text}"),
                retryable: status.is_server_error(),
                retry_after: hint,
            });
        }
        let parsed: ApiResponse = resp.json().map_err(transport)?;
        let choice = parsed.choices.into_iter().next().ok_or_else(|| GatewayError::Provider {
            message: "response has no choices".into(),
            retryable: false,
            retry_after: None,
        })?;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::Length,
            Some("stop") | None => FinishReason::Stop,
            Some(_) => FinishReason::Error,
        };
        Ok(CompletionResponse {
            text: choice.text,
            finish_reason,
            provider_latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}
