//! Completion clients used by glue pieces and the assembly assistant.

use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_RETRIES: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("LLM request timed out after {0:?}")]
    Timeout(Duration),
    #[error("LLM transport error: {0}")]
    Transport(String),
    #[error("LLM endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed LLM response: {0}")]
    BadResponse(String),
    #[error("scripted transcript exhausted after {0} exchange(s)")]
    TranscriptExhausted(usize),
    #[error("scripted exchange {index} expected the prompt to contain {expected:?}")]
    TranscriptMismatch { index: usize, expected: String },
    #[error("no LLM client configured")]
    NotConfigured,
    #[error("LLM configuration: {0}")]
    Config(String),
}

impl ClientError {
    pub fn is_timeout(&self) -> bool {
        matches!(self, ClientError::Timeout(_))
    }

    fn retryable(&self) -> bool {
        match self {
            ClientError::Timeout(_) | ClientError::Transport(_) => true,
            ClientError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ClientError>;
}

impl<C: CompletionClient + ?Sized> CompletionClient for Arc<C> {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        (**self).complete(prompt)
    }
}

/// Returns the prompt unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoClient;

impl CompletionClient for EchoClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        Ok(prompt.to_string())
    }
}

/// Always fails with [`ClientError::NotConfigured`].
#[derive(Debug, Clone, Copy, Default)]
pub struct UnconfiguredClient;

impl CompletionClient for UnconfiguredClient {
    fn complete(&self, _prompt: &str) -> Result<String, ClientError> {
        Err(ClientError::NotConfigured)
    }
}

/// One canned exchange. `expect` must occur somewhere in the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    #[serde(default)]
    pub expect: String,
    pub response: String,
}

/// Replays an ordered transcript of canned responses.
///
/// The transcript file is a JSON array of `{"expect": "...", "response": "..."}`.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    exchanges: Vec<Exchange>,
    state: Mutex<ScriptState>,
}

#[derive(Debug, Default)]
struct ScriptState {
    next: usize,
    prompts: Vec<String>,
}

impl ScriptedClient {
    pub fn new(exchanges: Vec<Exchange>) -> Self {
        ScriptedClient { exchanges, state: Mutex::default() }
    }

    pub fn responses<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(
            responses
                .into_iter()
                .map(|r| Exchange { expect: String::new(), response: r.into() })
                .collect(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self, ClientError> {
        let exchanges: Vec<Exchange> = serde_json::from_str(text)
            .map_err(|e| ClientError::Config(format!("invalid transcript: {e}")))?;
        Ok(Self::new(exchanges))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ClientError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| ClientError::Config(format!("cannot read transcript {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Prompts received so far, in order.
    pub fn prompts(&self) -> Vec<String> {
        self.state.lock().expect("script state poisoned").prompts.clone()
    }

    pub fn remaining(&self) -> usize {
        self.exchanges.len() - self.state.lock().expect("script state poisoned").next
    }
}

impl CompletionClient for ScriptedClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let mut state = self.state.lock().expect("script state poisoned");
        state.prompts.push(prompt.to_string());
        let index = state.next;
        let exchange = self.exchanges.get(index).ok_or(ClientError::TranscriptExhausted(index))?;
        if !prompt.contains(&exchange.expect) {
            return Err(ClientError::TranscriptMismatch { index, expected: exchange.expect.clone() });
        }
        state.next += 1;
        Ok(exchange.response.clone())
    }
}

/// OpenAI-style chat completion endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpClientConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub retries: u32,
}

impl HttpClientConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpClientConfig {
            endpoint: endpoint.into(),
            api_key: None,
            model: "gpt-4".into(),
            timeout: DEFAULT_TIMEOUT,
            retries: DEFAULT_RETRIES,
        }
    }
}

pub struct HttpCompletionClient {
    config: HttpClientConfig,
    http: reqwest::blocking::Client,
}

impl HttpCompletionClient {
    pub fn new(config: HttpClientConfig) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(HttpCompletionClient { config, http })
    }

    fn attempt(&self, prompt: &str) -> Result<String, ClientError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.http.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                ClientError::Timeout(self.config.timeout)
            } else {
                ClientError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ClientError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ClientError::Status { status: status.as_u16(), body: text });
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ClientError::BadResponse(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .or_else(|| value.pointer("/choices/0/text"))
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| ClientError::BadResponse("no choices[0].message.content".into()))
    }
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let mut attempt = 0;
        loop {
            match self.attempt(prompt) {
                Err(e) if e.retryable() && attempt < self.config.retries => {
                    tracing::warn!(error = %e, attempt, "retrying LLM request");
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

pub const ENV_ENDPOINT: &str = "MOSAIC_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "MOSAIC_LLM_API_KEY";
pub const ENV_MODEL: &str = "MOSAIC_LLM_MODEL";
pub const ENV_TRANSCRIPT: &str = "MOSAIC_LLM_TRANSCRIPT";

/// Builds a client from the environment: a scripted transcript wins over an
/// HTTP endpoint. `Ok(None)` when neither is set.
pub fn client_from_env() -> Result<Option<Arc<dyn CompletionClient>>, ClientError> {
    client_from_vars(|k| std::env::var(k).ok().filter(|v| !v.is_empty()))
}

pub fn client_from_vars(
    var: impl Fn(&str) -> Option<String>,
) -> Result<Option<Arc<dyn CompletionClient>>, ClientError> {
    if let Some(path) = var(ENV_TRANSCRIPT) {
        return Ok(Some(Arc::new(ScriptedClient::from_file(path)?)));
    }
    let Some(endpoint) = var(ENV_ENDPOINT) else { return Ok(None) };
    let mut config = HttpClientConfig::new(endpoint);
    config.api_key = var(ENV_API_KEY);
    if let Some(model) = var(ENV_MODEL) {
        config.model = model;
    }
    Ok(Some(Arc::new(HttpCompletionClient::new(config)?)))
}
