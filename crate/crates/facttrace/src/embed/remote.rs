//! HTTP embedding provider.
//!
//! Wire contract: POST `endpoint` with `{"model": <string>, "inputs":
//! [<string>, ...]}`, response `{"vectors": [[<number>, ...], ...]}` with
//! one vector per input, in order. The API key is read from the environment
//! variable named by `api_key_env` (default `FASTTRACK_EMBED_KEY`) and sent
//! as a bearer token when present.

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingProvider, EmbeddingVector, RetryPolicy};

pub const DEFAULT_EMBED_KEY_ENV: &str = "FASTTRACK_EMBED_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteEmbedConfig {
    pub endpoint: String,
    pub model: String,
    pub dim: usize,
    #[serde(default = "default_batch_limit")]
    pub batch_limit: usize,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_batch_limit() -> usize {
    96
}

fn default_key_env() -> String {
    DEFAULT_EMBED_KEY_ENV.to_string()
}

fn default_timeout_secs() -> u64 {
    60
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    inputs: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

pub struct HttpEmbeddingProvider {
    config: RemoteEmbedConfig,
    provider_id: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpEmbeddingProvider {
    pub fn new(config: RemoteEmbedConfig) -> Result<Self, EmbedError> {
        if config.dim == 0 {
            return Err(EmbedError::InvalidInput("dim must be positive".into()));
        }
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let http = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| EmbedError::Provider {
                attempts: 0,
                last: format!("failed to build http client: {e}"),
            })?;
        let provider_id = format!("remote:{}:{}", config.endpoint, config.model);
        Ok(Self {
            config,
            provider_id,
            api_key,
            http,
        })
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn batch_limit(&self) -> usize {
        self.config.batch_limit.max(1)
    }

    fn retry(&self) -> RetryPolicy {
        self.config.retry
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let body = EmbedRequest {
            model: &self.config.model,
            inputs: texts,
        };
        let mut req = self.http.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| EmbedError::Provider {
            attempts: 1,
            last: e.to_string(),
        })?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(EmbedError::Provider {
                attempts: 1,
                last: format!("{status}: {text}"),
            });
        }
        let parsed: EmbedResponse = resp
            .json()
            .map_err(|e| EmbedError::Protocol(format!("bad embed response: {e}")))?;
        parsed
            .vectors
            .into_iter()
            .map(EmbeddingVector::new)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_types_round_trip() {
        let req = EmbedRequest {
            model: "m",
            inputs: &["a", "b"],
        };
        let json = serde_json::to_string(&req).unwrap();
        assert_eq!(json, r#"{"model":"m","inputs":["a","b"]}"#);
        let resp: EmbedResponse =
            serde_json::from_str(r#"{"vectors":[[0.1,0.2],[0.3,0.4]]}"#).unwrap();
        assert_eq!(resp.vectors.len(), 2);
    }

    #[test]
    fn config_defaults_fill_in() {
        let cfg: RemoteEmbedConfig = serde_json::from_str(
            r#"{"endpoint":"http://localhost:9/embed","model":"m","dim":384}"#,
        )
        .unwrap();
        assert_eq!(cfg.batch_limit, 96);
        assert_eq!(cfg.api_key_env, DEFAULT_EMBED_KEY_ENV);
        assert_eq!(cfg.retry, RetryPolicy::default());
    }
}
