//! Chat-completion access for every agent.
//!
//! Agents talk to a [`Gateway`], which validates requests, retries transient
//! failures and accumulates token usage over an [`LlmBackend`].

#[cfg(feature = "http")]
mod http;
mod scripted;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[cfg(feature = "http")]
pub use http::{HttpBackend, HttpSettings};
pub use scripted::{Exchange, ScriptedBackend};

/// Environment variable holding the API credential for HTTP backends.
pub const API_KEY_ENV: &str = "MLZERO_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Assistant,
}

/// Per-role generation settings resolved from configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleSettings {
    pub role_name: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub multi_turn: bool,
}

impl RoleSettings {
    pub fn new(role_name: &str) -> Self {
        Self {
            role_name: role_name.to_string(),
            model: String::new(),
            temperature: 0.0,
            max_tokens: 65536,
            multi_turn: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    /// Configuration role: `coder`, `planner` or `file_reader`.
    pub role_name: String,
    /// Specific agent issuing the request, e.g. `executer`.
    pub agent: String,
    pub model: String,
    pub system_text: String,
    pub turns: Vec<(Speaker, String)>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub multi_turn: bool,
}

impl LlmRequest {
    /// Single-turn request carrying one user prompt.
    pub fn single(settings: &RoleSettings, agent: &str, prompt: impl Into<String>) -> Self {
        Self {
            role_name: settings.role_name.clone(),
            agent: agent.to_string(),
            model: settings.model.clone(),
            system_text: String::new(),
            turns: vec![(Speaker::User, prompt.into())],
            temperature: settings.temperature,
            max_tokens: settings.max_tokens,
            multi_turn: false,
        }
    }

    /// Multi-turn request over an accumulated conversation.
    pub fn conversation(settings: &RoleSettings, agent: &str, turns: Vec<(Speaker, String)>) -> Self {
        Self {
            turns,
            multi_turn: true,
            ..Self::single(settings, agent, String::new())
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        if self.turns.is_empty() {
            return Err(LlmError::InvalidRequest("request has no turns".into()));
        }
        if !self.multi_turn && (self.turns.len() != 1 || self.turns[0].0 != Speaker::User) {
            return Err(LlmError::InvalidRequest(
                "single-turn request must hold exactly one user message".into(),
            ));
        }
        Ok(())
    }

    /// The last user message, which is the prompt in single-turn mode.
    pub fn prompt(&self) -> &str {
        self.turns
            .iter()
            .rev()
            .find(|(s, _)| *s == Speaker::User)
            .map(|(_, t)| t.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmResponse {
    pub text: String,
    pub input_token_count: u64,
    pub output_token_count: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("scripted responses exhausted for agent `{agent}` (role `{role}`)")]
    QueueExhausted { role: String, agent: String },
    #[error("token limit exceeded: {0}")]
    TokenLimit(String),
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("missing credential: set {API_KEY_ENV}")]
    MissingApiKey,
}

impl LlmError {
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::Transport(_))
    }
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    /// No sleeping between attempts; used by tests and scripted runs.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            initial_backoff: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TokenUsage {
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

/// Shared entry point for all agents.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn LlmBackend>,
    retry: RetryPolicy,
    usage: Arc<Mutex<TokenUsage>>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn LlmBackend>) -> Self {
        Self::with_retry(backend, RetryPolicy::default())
    }

    pub fn with_retry(backend: Arc<dyn LlmBackend>, retry: RetryPolicy) -> Self {
        Self {
            backend,
            retry,
            usage: Arc::new(Mutex::new(TokenUsage::default())),
        }
    }

    pub fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        request.validate()?;
        let attempts = self.retry.max_attempts.max(1);
        let mut backoff = self.retry.initial_backoff;
        let mut attempt = 1;
        loop {
            match self.backend.complete(request) {
                Ok(response) => {
                    let mut usage = self.usage.lock().expect("usage lock");
                    usage.calls += 1;
                    usage.input_tokens += response.input_token_count;
                    usage.output_tokens += response.output_token_count;
                    return Ok(response);
                }
                Err(err) if err.is_transient() && attempt < attempts => {
                    tracing::warn!(attempt, agent = %request.agent, error = %err, "retrying LLM call");
                    if !backoff.is_zero() {
                        std::thread::sleep(backoff);
                    }
                    backoff *= 2;
                    attempt += 1;
                }
                Err(err) => return Err(err),
            }
        }
    }

    /// Single-turn convenience returning only the completion text.
    pub fn ask(&self, settings: &RoleSettings, agent: &str, prompt: &str) -> Result<String, LlmError> {
        self.complete(&LlmRequest::single(settings, agent, prompt))
            .map(|r| r.text)
    }

    pub fn usage(&self) -> TokenUsage {
        *self.usage.lock().expect("usage lock")
    }
}

/// Rough token estimate used when a backend reports no counts.
pub fn estimate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
