//! Blocking chat-completion client over the widely served
//! `POST .../chat/completions` JSON protocol.
//!
//! Request body:
//!
//! ```json
//! {"model":"m","messages":[{"role":"user","content":[{"type":"text","text":"hi"},
//!   {"type":"image_url","image_url":{"url":"data:image/png;base64,AAAA"}}]}],
//!  "temperature":0.5,"max_tokens":512}
//! ```
//!
//! The reply text is `choices[0].message.content`.

use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::message::{ChatMessage, ContentPart};
use super::ClientError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_env_var_name: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_in_flight: usize,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            endpoint_url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model_name: "default".into(),
            auth_token_env_var_name: "PILOT_API_TOKEN".into(),
            timeout_ms: 60_000,
            max_retries: 3,
            backoff_base_ms: 500,
            backoff_cap_ms: 30_000,
            temperature: 0.5,
            max_tokens: 1024,
            max_in_flight: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ClientConfig {
    pub fn sampling(&self) -> Sampling {
        Sampling {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

pub fn request_body(model: &str, messages: &[ChatMessage], sampling: Sampling) -> Value {
    let messages: Vec<Value> = messages
        .iter()
        .map(|m| {
            let content = match m.parts.as_slice() {
                [ContentPart::Text(t)] => Value::String(t.clone()),
                parts => Value::Array(
                    parts
                        .iter()
                        .map(|p| match p {
                            ContentPart::Text(t) => json!({"type": "text", "text": t}),
                            ContentPart::Image(img) => {
                                json!({"type": "image_url", "image_url": {"url": img.data_url()}})
                            }
                        })
                        .collect(),
                ),
            };
            json!({"role": m.role, "content": content})
        })
        .collect();
    json!({
        "model": model,
        "messages": messages,
        "temperature": sampling.temperature,
        "max_tokens": sampling.max_tokens,
    })
}

pub fn parse_response(body: &str) -> Result<String, ClientError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| ClientError::Protocol(format!("response is not JSON: {e}")))?;
    let content = v
        .pointer("/choices/0/message/content")
        .ok_or_else(|| ClientError::Protocol("missing choices[0].message.content".into()))?;
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect()),
        other => Err(ClientError::Protocol(format!("unexpected content {other}"))),
    }
}

struct Gate {
    count: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut n = self.count.lock();
        while *n >= self.limit {
            self.freed.wait(&mut n);
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.count.lock() -= 1;
        self.0.freed.notify_one();
    }
}

enum Attempt {
    Done(String),
    Retryable(String),
}

/// Stateless per request; safe to share across threads.
pub struct ChatClient {
    config: ClientConfig,
    agent: ureq::Agent,
    jitter: Mutex<ChaCha8Rng>,
    gate: Gate,
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient").field("config", &self.config).finish()
    }
}

impl ChatClient {
    pub fn new(config: ClientConfig, seed: u64) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let limit = config.max_in_flight.max(1);
        ChatClient {
            config,
            agent,
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            gate: Gate {
                count: Mutex::new(0),
                freed: Condvar::new(),
                limit,
            },
        }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    /// Full-jitter exponential backoff: uniform in `[0, min(cap, base * 2^attempt)]`.
    pub fn backoff_delay(&self, attempt: u32) -> Duration {
        let ceiling = self
            .config
            .backoff_base_ms
            .saturating_mul(1u64 << attempt.min(30))
            .min(self.config.backoff_cap_ms);
        let ms = if ceiling == 0 {
            0
        } else {
            self.jitter.lock().gen_range(0..=ceiling)
        };
        Duration::from_millis(ms)
    }

    pub fn chat(&self, messages: &[ChatMessage], sampling: Sampling) -> Result<String, ClientError> {
        let body = request_body(&self.config.model_name, messages, sampling).to_string();
        let text = self.post(&self.config.endpoint_url, &body)?;
        parse_response(&text)
    }

    /// Fetches an embedding from an `/embeddings` endpoint (`data[0].embedding`).
    pub fn embed(&self, url: &str, text: &str) -> Result<Vec<f64>, ClientError> {
        let body = json!({"model": self.config.model_name, "input": text}).to_string();
        let reply = self.post(url, &body)?;
        let v: Value = serde_json::from_str(&reply).map_err(|e| ClientError::Protocol(format!("invalid JSON: {e}")))?;
        v.pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| ClientError::Protocol("missing data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| ClientError::Protocol("non-numeric embedding".into())))
            .collect()
    }

    /// POSTs a JSON body with retries and returns the 2xx response text.
    fn post(&self, url: &str, body: &str) -> Result<String, ClientError> {
        let token = std::env::var(&self.config.auth_token_env_var_name).ok();
        let _slot = self.gate.acquire();
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff_delay(attempt - 1));
            }
            match self.attempt(url, body, token.as_deref())? {
                Attempt::Done(text) => return Ok(text),
                Attempt::Retryable(why) => {
                    log::warn!("chat attempt {} failed: {why}", attempt + 1);
                    last = why;
                }
            }
        }
        Err(ClientError::Transport {
            attempts: self.config.max_retries + 1,
            last,
        })
    }

    fn attempt(&self, url: &str, body: &str, token: Option<&str>) -> Result<Attempt, ClientError> {
        let mut req = self
            .agent
            .post(url)
            .header("Content-Type", "application/json");
        if let Some(tok) = token {
            req = req.header("Authorization", &format!("Bearer {tok}"));
        }
        let resp = match req.send(body) {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Retryable(format!("transport error: {e}"))),
        };
        let status = resp.status().as_u16();
        let text = match resp.into_body().read_to_string() {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retryable(format!("status {status}, unreadable body: {e}"))),
        };
        match status {
            200..=299 => Ok(Attempt::Done(text)),
            429 | 500..=599 => Ok(Attempt::Retryable(format!("status {status}"))),
            _ => Err(ClientError::Status {
                status,
                body: text.chars().take(500).collect(),
            }),
        }
    }
}

/// One-shot convenience over a fresh client.
pub fn chat(config: &ClientConfig, messages: &[ChatMessage], sampling: Sampling) -> Result<String, ClientError> {
    ChatClient::new(config.clone(), 0).chat(messages, sampling)
}
