//! Chat-completion client.
//!
//! Speaks the common `POST {base}/chat/completions` schema: a `messages`
//! array of `{role, content}` in, `choices[0].message.content` out. Any
//! compatible endpoint, hosted or local, can be used by pointing the base URL
//! at it.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn single(model: &str, prompt: impl Into<String>, temperature: Option<f32>) -> Self {
        ChatRequest {
            model: model.to_string(),
            messages: vec![ChatMessage::user(prompt)],
            temperature,
            max_tokens: None,
        }
    }

    /// Text of the last message, which is where every prompt in this crate lives.
    pub fn prompt(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or_default()
    }

    /// Hex SHA-256 over the roles and contents of every message.
    pub fn prompt_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for m in &self.messages {
            hasher.update(m.role.as_bytes());
            hasher.update([0]);
            hasher.update(m.content.as_bytes());
            hasher.update([0]);
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Option<TokenUsage>,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("endpoint rejected the request (HTTP {status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("cannot decode response: {0}")]
    Decode(String),
    #[error("model returned an empty completion")]
    EmptyCompletion,
    #[error("empty request: no messages")]
    EmptyRequest,
}

/// Anything that can answer a chat request. Implementations must be safe to
/// share between sessions.
pub trait ChatModel: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError>;
}

impl<M: ChatModel + ?Sized> ChatModel for std::sync::Arc<M> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 4,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(20),
        }
    }
}

/// One line of the per-call log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallRecord {
    pub model: String,
    pub prompt_sha256: String,
    pub attempts: u32,
    pub latency_ms: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct HttpChatClient {
    http: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    call_log: Option<Mutex<File>>,
}

/// Environment variable holding the bearer token, if the endpoint needs one.
pub const API_KEY_ENV: &str = "CHAT_API_KEY";

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<TokenUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(ChatResponse),
    Retry { error: ChatError, wait: Option<Duration> },
    Fatal(ChatError),
}

impl HttpChatClient {
    /// `base_url` is the API root, e.g. `http://localhost:8000/v1`.
    pub fn new(base_url: &str) -> Result<Self, ChatError> {
        Self::with_timeout(base_url, Duration::from_secs(120))
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Result<Self, ChatError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ChatError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(HttpChatClient {
            http,
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            retry: RetryPolicy::default(),
            call_log: None,
        })
    }

    pub fn api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn retry_policy(mut self, policy: RetryPolicy) -> Self {
        self.retry = policy;
        self
    }

    /// Appends one JSON line per call to `path`.
    pub fn call_log(mut self, path: &Path) -> std::io::Result<Self> {
        let file = File::options().create(true).append(true).open(path)?;
        self.call_log = Some(Mutex::new(file));
        Ok(self)
    }

    fn attempt(&self, request: &ChatRequest) -> Attempt {
        let started = Instant::now();
        let mut builder = self.http.post(&self.url).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = match builder.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => {
                return Attempt::Retry {
                    error: ChatError::Timeout { attempts: 0 },
                    wait: None,
                }
            }
            Err(e) => {
                return Attempt::Retry {
                    error: ChatError::Transport {
                        attempts: 0,
                        message: e.to_string(),
                    },
                    wait: None,
                }
            }
        };
        let status = response.status().as_u16();
        let retry_after = response
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let body = match response.text() {
            Ok(b) => b,
            Err(e) if e.is_timeout() => {
                return Attempt::Retry {
                    error: ChatError::Timeout { attempts: 0 },
                    wait: None,
                }
            }
            Err(e) => {
                return Attempt::Retry {
                    error: ChatError::Transport {
                        attempts: 0,
                        message: e.to_string(),
                    },
                    wait: None,
                }
            }
        };
        match status {
            200..=299 => {}
            401 | 403 => return Attempt::Fatal(ChatError::Auth { status }),
            408 | 429 | 500..=599 => {
                return Attempt::Retry {
                    error: ChatError::Rejected { status, body },
                    wait: retry_after,
                }
            }
            _ => return Attempt::Fatal(ChatError::Rejected { status, body }),
        }
        let wire: WireResponse = match serde_json::from_str(&body) {
            Ok(w) => w,
            Err(e) => return Attempt::Fatal(ChatError::Decode(e.to_string())),
        };
        let text = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        if text.trim().is_empty() {
            return Attempt::Fatal(ChatError::EmptyCompletion);
        }
        Attempt::Done(ChatResponse {
            text,
            usage: wire.usage,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }

    fn log_call(&self, record: &CallRecord) {
        tracing::debug!(
            model = %record.model,
            prompt = %record.prompt_sha256,
            attempts = record.attempts,
            latency_ms = record.latency_ms,
            ok = record.ok,
            "chat call"
        );
        if let Some(file) = &self.call_log {
            let line = serde_json::to_string(record).expect("call records serialize");
            if let Ok(mut f) = file.lock() {
                if let Err(e) = writeln!(f, "{line}") {
                    tracing::warn!("cannot write call log: {e}");
                }
            }
        }
    }
}

impl ChatModel for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        if request.messages.is_empty() {
            return Err(ChatError::EmptyRequest);
        }
        let started = Instant::now();
        let mut backoff = self.retry.initial_backoff;
        let mut attempts = 0;
        let result = loop {
            attempts += 1;
            match self.attempt(request) {
                Attempt::Done(r) => break Ok(r),
                Attempt::Fatal(e) => break Err(e),
                Attempt::Retry { error, wait } => {
                    if attempts > self.retry.max_retries {
                        break Err(match error {
                            ChatError::Timeout { .. } => ChatError::Timeout { attempts },
                            ChatError::Transport { message, .. } => {
                                ChatError::Transport { attempts, message }
                            }
                            other => other,
                        });
                    }
                    let delay = wait.unwrap_or(backoff).min(self.retry.max_backoff);
                    tracing::info!(attempt = attempts, ?delay, "retrying chat call: {error}");
                    std::thread::sleep(delay);
                    backoff = (backoff * 2).min(self.retry.max_backoff);
                }
            }
        };
        let record = CallRecord {
            model: request.model.clone(),
            prompt_sha256: request.prompt_hash(),
            attempts,
            latency_ms: started.elapsed().as_millis() as u64,
            ok: result.is_ok(),
            usage: result.as_ref().ok().and_then(|r| r.usage),
            error: result.as_ref().err().map(ToString::to_string),
        };
        self.log_call(&record);
        result
    }
}
