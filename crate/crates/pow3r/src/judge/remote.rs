//! Remote LLM judge client.
//!
//! A minimal chat-completion POST with header-based auth behind a `Transport`
//! trait, so tests can swap the wire for a mock. Calls are retried with
//! exponential backoff; a call that still fails is reported upward and the
//! affected cell becomes an invalid verdict.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::digest::sha256_hex;
use crate::judge::prompt::PromptVariant;

/// One judge call: a system prompt plus the rendered user content.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reasoning_effort: Option<String>,
}

/// Abstract wire for chat-completion calls. Implementations must be safe to
/// share across the bounded-parallel judging workers.
pub trait Transport: Send + Sync {
    /// Returns the assistant message text for one request.
    fn post_chat(&self, request: &ChatRequest) -> Result<String, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteJudgeConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub reasoning_effort: Option<String>,
    /// Sampling temperature; judges run at 1.0.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Completion budget per call.
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub variant: PromptVariant,
    /// Total attempts per call before the cell goes invalid.
    #[serde(default = "default_attempts")]
    pub attempts: u32,
    /// First backoff delay in milliseconds; doubles per retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_initial_ms: u64,
    /// Ceiling on concurrent in-flight requests.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Environment variable holding the bearer token, if any.
    #[serde(default)]
    pub auth_env: Option<String>,
}

fn default_temperature() -> f64 {
    1.0
}
fn default_max_tokens() -> u32 {
    2048
}
fn default_attempts() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    1000
}
fn default_parallelism() -> usize {
    4
}

impl Default for RemoteJudgeConfig {
    fn default() -> Self {
        RemoteJudgeConfig {
            endpoint: String::new(),
            model: String::new(),
            reasoning_effort: None,
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            variant: PromptVariant::PerCriterion,
            attempts: default_attempts(),
            backoff_initial_ms: default_backoff_ms(),
            parallelism: default_parallelism(),
            auth_env: None,
        }
    }
}

impl RemoteJudgeConfig {
    /// Digest of everything that can change a verdict; part of the cache key.
    pub fn digest(&self) -> String {
        let doc = json!({
            "endpoint": self.endpoint,
            "model": self.model,
            "reasoning_effort": self.reasoning_effort,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "variant": self.variant,
        });
        sha256_hex(doc.to_string().as_bytes())
    }

    pub fn backoff_for_attempt(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.backoff_initial_ms.saturating_mul(1 << attempt.min(16)))
    }
}

/// Retries `call` per the config's attempt budget with exponential backoff.
pub fn call_with_retries(
    config: &RemoteJudgeConfig,
    transport: &dyn Transport,
    request: &ChatRequest,
) -> Result<String, String> {
    let mut last_error = String::from("no attempts configured");
    for attempt in 0..config.attempts.max(1) {
        if attempt > 0 {
            std::thread::sleep(config.backoff_for_attempt(attempt - 1));
        }
        match transport.post_chat(request) {
            Ok(body) => return Ok(body),
            Err(e) => last_error = e,
        }
    }
    Err(last_error)
}

/// Production transport: JSON POST to a chat-completions endpoint with
/// optional bearer auth.
pub struct HttpTransport {
    endpoint: String,
    bearer: Option<String>,
    timeout: Duration,
}

impl HttpTransport {
    pub fn new(endpoint: String, bearer: Option<String>, timeout: Duration) -> Self {
        HttpTransport {
            endpoint,
            bearer,
            timeout,
        }
    }

    /// Reads the bearer token from the configured environment variable.
    pub fn from_config(config: &RemoteJudgeConfig) -> Result<Self, String> {
        let bearer = match &config.auth_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| format!("auth env var {var} is not set"))?,
            ),
            None => None,
        };
        Ok(HttpTransport::new(
            config.endpoint.clone(),
            bearer,
            Duration::from_secs(60),
        ))
    }
}

impl Transport for HttpTransport {
    fn post_chat(&self, request: &ChatRequest) -> Result<String, String> {
        let mut body = json!({
            "model": request.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let Some(effort) = &request.reasoning_effort {
            body["reasoning_effort"] = json!(effort);
        }
        let mut builder = ureq::post(&self.endpoint);
        if let Some(token) = &self.bearer {
            builder = builder.header("authorization", format!("Bearer {token}"));
        }
        let mut response = builder
            .config()
            .timeout_global(Some(self.timeout))
            .build()
            .send_json(&body)
            .map_err(|e| format!("POST {}: {e}", self.endpoint))?;
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| format!("read body: {e}"))?;
        extract_message_content(&text)
    }
}

/// Pulls the assistant text out of a chat-completion response body.
fn extract_message_content(body: &str) -> Result<String, String> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| format!("response is not JSON: {e}"))?;
    value
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| "response missing choices[0].message.content".to_string())
}
