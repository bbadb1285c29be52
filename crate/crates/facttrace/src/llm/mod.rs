//! Chat-completion client interface, prompt templates, and the strict
//! parsers for the `#keywords` / `#analysis` / `#scores` response contracts.
//!
//! [`remote::HttpChatClient`] talks to any service speaking the generic
//! `{model, messages, temperature, max_tokens} -> {content}` shape;
//! [`CannedClient`] and [`scripted::ScriptedOracle`] are deterministic
//! offline clients used by tests and the acceptance suite.

pub mod parse;
pub mod prompt;
pub mod remote;
pub mod scripted;

pub use parse::{format_scores, parse_keywords, parse_scores, ScoreVector};
pub use prompt::{PromptTemplate, TemplateKind};
pub use scripted::{OracleRules, ScriptedOracle};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("prompt of {len} chars exceeds context budget of {budget}")]
    InputTooLong { len: usize, budget: usize },
    #[error("provider failure after {attempts} attempt(s): {last}")]
    Provider { attempts: u32, last: String },
    #[error("no canned response for prompt")]
    NoCannedResponse,
    #[error(transparent)]
    Parse(#[from] parse::ParseError),
    #[error(transparent)]
    Template(#[from] prompt::TemplateError),
}

/// Generation settings shared by every client implementation.
///
/// Temperature defaults to 0 and is sent as exactly 0; the two output
/// budgets in use are 256 tokens for keyword labeling and 1024 for batch
/// supportiveness evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlmConfig {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub retry_budget: u32,
    /// Prompts longer than this many characters are rejected before any
    /// network call.
    pub context_chars: usize,
    /// Upper bound on concurrent requests issued against this client.
    pub parallelism: usize,
    /// Milliseconds before the first retry; doubles per attempt.
    pub backoff_ms: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            model_id: "offline".to_string(),
            temperature: 0.0,
            max_output_tokens: 1024,
            retry_budget: 3,
            context_chars: 120_000,
            parallelism: 4,
            backoff_ms: 1000,
        }
    }
}

impl LlmConfig {
    /// Settings for keyword labeling calls.
    pub fn for_keywords(mut self) -> Self {
        self.max_output_tokens = 256;
        self
    }

    /// Settings for batch supportiveness evaluation calls.
    pub fn for_eval(mut self) -> Self {
        self.max_output_tokens = 1024;
        self
    }
}

/// A chat-completion backend. Implementations perform exactly one request
/// per [`LlmClient::complete_once`] call; precondition checks and retries
/// live in [`complete`].
pub trait LlmClient: Send + Sync {
    fn config(&self) -> &LlmConfig;
    fn complete_once(&self, prompt: &str) -> Result<String, LlmError>;
}

/// Sends `prompt` and returns the raw completion text.
///
/// Rejects empty prompts and prompts over the client's context budget
/// before any call is made. Transport failures are retried up to the
/// client's retry budget (total attempts), with exponential backoff.
pub fn complete(client: &dyn LlmClient, prompt: &str) -> Result<String, LlmError> {
    if prompt.is_empty() {
        return Err(LlmError::EmptyPrompt);
    }
    let cfg = client.config();
    if prompt.len() > cfg.context_chars {
        return Err(LlmError::InputTooLong {
            len: prompt.len(),
            budget: cfg.context_chars,
        });
    }
    let attempts = cfg.retry_budget.max(1);
    let mut last = String::new();
    for attempt in 1..=attempts {
        match client.complete_once(prompt) {
            Ok(text) => return Ok(text),
            Err(LlmError::Provider { last: msg, .. }) => {
                last = msg;
                if attempt < attempts {
                    let factor = 1u64 << (attempt - 1).min(16);
                    std::thread::sleep(std::time::Duration::from_millis(
                        cfg.backoff_ms.saturating_mul(factor),
                    ));
                }
            }
            Err(other) => return Err(other),
        }
    }
    Err(LlmError::Provider { attempts, last })
}

/// Deterministic stub client answering from a fixed prompt -> response map.
pub struct CannedClient {
    config: LlmConfig,
    responses: HashMap<String, String>,
}

impl CannedClient {
    pub fn new(responses: HashMap<String, String>) -> Self {
        Self {
            config: LlmConfig {
                model_id: "canned".to_string(),
                backoff_ms: 1,
                ..LlmConfig::default()
            },
            responses,
        }
    }

    pub fn with_config(mut self, config: LlmConfig) -> Self {
        self.config = config;
        self
    }
}

impl LlmClient for CannedClient {
    fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn complete_once(&self, prompt: &str) -> Result<String, LlmError> {
        self.responses
            .get(prompt)
            .cloned()
            .ok_or(LlmError::NoCannedResponse)
    }
}
