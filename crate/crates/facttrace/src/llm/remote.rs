//! HTTP chat-completion client.
//!
//! Wire contract: POST `endpoint` with `{"model": <string>, "messages":
//! [{"role": "user", "content": <string>}], "temperature": <number>,
//! "max_tokens": <integer>}`, response `{"content": <string>}`. Any
//! provider or local server exposing this generic shape can be plugged in.
//! The API key comes from the environment variable named by `api_key_env`
//! (default `FASTTRACK_LLM_KEY`).

use serde::{Deserialize, Serialize};

use super::{LlmClient, LlmConfig, LlmError};

pub const DEFAULT_LLM_KEY_ENV: &str = "FASTTRACK_LLM_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteLlmConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_retry_budget")]
    pub retry_budget: u32,
    #[serde(default = "default_context_chars")]
    pub context_chars: usize,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_key_env() -> String {
    DEFAULT_LLM_KEY_ENV.to_string()
}

fn default_max_tokens() -> u32 {
    1024
}

fn default_retry_budget() -> u32 {
    3
}

fn default_context_chars() -> usize {
    120_000
}

fn default_parallelism() -> usize {
    4
}

fn default_timeout_secs() -> u64 {
    120
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    content: String,
}

pub struct HttpChatClient {
    endpoint: String,
    api_key: Option<String>,
    config: LlmConfig,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(remote: RemoteLlmConfig) -> Result<Self, LlmError> {
        let api_key = std::env::var(&remote.api_key_env).ok().filter(|k| !k.is_empty());
        let http = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(remote.timeout_secs))
            .build()
            .map_err(|e| LlmError::Provider {
                attempts: 0,
                last: format!("failed to build http client: {e}"),
            })?;
        let config = LlmConfig {
            model_id: remote.model.clone(),
            temperature: remote.temperature,
            max_output_tokens: remote.max_output_tokens,
            retry_budget: remote.retry_budget,
            context_chars: remote.context_chars,
            parallelism: remote.parallelism,
            backoff_ms: 1000,
        };
        Ok(Self {
            endpoint: remote.endpoint,
            api_key,
            config,
            http,
        })
    }
}

impl LlmClient for HttpChatClient {
    fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn complete_once(&self, prompt: &str) -> Result<String, LlmError> {
        let body = ChatRequest {
            model: &self.config.model_id,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: self.config.temperature,
            max_tokens: self.config.max_output_tokens,
        };
        let mut req = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| LlmError::Provider {
            attempts: 1,
            last: e.to_string(),
        })?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(LlmError::Provider {
                attempts: 1,
                last: format!("{status}: {text}"),
            });
        }
        let parsed: ChatResponse = resp.json().map_err(|e| LlmError::Provider {
            attempts: 1,
            last: format!("bad chat response: {e}"),
        })?;
        Ok(parsed.content)
    }
}
