//! Chat-completions HTTP backend.

use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use base64::Engine;
use log::{debug, warn};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, ChatMessage, Exchange, ModelBackend, ModelRequest, Reply, Role, Tier};

fn default_timeout() -> u64 {
    120
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub credential_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Extra attempts after the first on transport errors and 5xx replies.
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default)]
    pub temperature: f64,
    /// First backoff delay; doubles on every retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    /// Image attached to the user message as base64, when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot: Option<PathBuf>,
    /// Keep request and response bodies on the reply for tracing.
    #[serde(default)]
    pub verbose: bool,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, credential_env: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            credential_env: credential_env.into(),
            timeout_secs: default_timeout(),
            retries: default_retries(),
            temperature: 0.0,
            backoff_base_ms: default_backoff_ms(),
            screenshot: None,
            verbose: false,
        }
    }
}

pub struct RemoteBackend {
    name: String,
    tier: Tier,
    cfg: RemoteConfig,
    client: Client,
}

impl RemoteBackend {
    pub fn new(name: impl Into<String>, tier: Tier, cfg: RemoteConfig) -> Self {
        let client = Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .expect("HTTP client builds");
        RemoteBackend { name: name.into(), tier, cfg, client }
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.cfg.endpoint.trim_end_matches('/'))
    }

    fn body(&self, messages: &[ChatMessage]) -> Result<Value, BackendError> {
        let image = match &self.cfg.screenshot {
            Some(path) => {
                let bytes = std::fs::read(path)
                    .map_err(|e| BackendError::BadResponse(format!("reading screenshot {}: {e}", path.display())))?;
                Some(base64::engine::general_purpose::STANDARD.encode(bytes))
            }
            None => None,
        };
        let messages: Vec<Value> = messages
            .iter()
            .map(|m| match (m.role, &image) {
                (Role::User, Some(b64)) => json!({
                    "role": "user",
                    "content": [
                        {"type": "text", "text": m.content},
                        {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{b64}")}},
                    ],
                }),
                _ => json!({"role": m.role, "content": m.content}),
            })
            .collect();
        Ok(json!({"model": self.cfg.model, "messages": messages, "temperature": self.cfg.temperature}))
    }
}

fn extract_content(body: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(body).map_err(|e| BackendError::BadResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::BadResponse("missing choices[0].message.content".into()))
}

impl ModelBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn tier(&self) -> Tier {
        self.tier
    }

    fn invoke(&self, request: &ModelRequest) -> Result<Reply, BackendError> {
        let token = std::env::var(&self.cfg.credential_env)
            .ok()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| BackendError::Auth(format!("environment variable {} is not set", self.cfg.credential_env)))?;
        let body = self.body(&request.messages)?;
        let url = self.url();
        let attempts = self.cfg.retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.cfg.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(20));
                thread::sleep(Duration::from_millis(delay));
            }
            debug!("{}: POST {url} attempt {}", self.name, attempt + 1);
            let resp = match self.client.post(&url).bearer_auth(&token).json(&body).send() {
                Ok(r) => r,
                Err(e) => {
                    last_error = e.to_string();
                    warn!("{}: transport error on attempt {}: {last_error}", self.name, attempt + 1);
                    continue;
                }
            };
            let status = resp.status();
            let text = match resp.text() {
                Ok(t) => t,
                Err(e) => {
                    last_error = e.to_string();
                    warn!("{}: reading body failed on attempt {}: {last_error}", self.name, attempt + 1);
                    continue;
                }
            };
            if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
                return Err(BackendError::Auth(format!("endpoint answered {status}")));
            }
            if status.is_server_error() {
                last_error = format!("endpoint answered {status}");
                warn!("{}: {last_error} on attempt {}", self.name, attempt + 1);
                continue;
            }
            if !status.is_success() {
                return Err(BackendError::BadResponse(format!("endpoint answered {status}: {text}")));
            }
            let content = extract_content(&text)?;
            let exchange = self.cfg.verbose.then(|| Exchange { request: body.clone(), response: text });
            return Ok(Reply { text: content, retries: attempt, exchange });
        }
        Err(BackendError::Transport { attempts, detail: last_error })
    }
}
