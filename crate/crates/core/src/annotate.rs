//! HTTP client that asks a vision model to describe rendered views.
//!
//! The request is a JSON POST of `{model, prompt, images}` with the images as
//! base64-encoded PGM; the response must be a JSON object with a `text` field.
//! A bearer token is taken from `CELLFORGE_API_KEY` when set.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::Serialize;
use thiserror::Error;

use crate::render::ViewImage;

pub const API_KEY_ENV: &str = "CELLFORGE_API_KEY";

pub const DEFAULT_PROMPT: &str = "You are shown a part or a set of parts from 4 different angles. Describe the 3D shape of the part(s) in one or more very short informal notes. Do not mention different views. Keep it insanely short. Do not write a full sentence.";

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("transport error after {attempts} attempt(s): {msg}")]
    Transport { attempts: u32, msg: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid annotate config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotateConfig {
    pub url: String,
    pub model: String,
    pub prompt: String,
    pub timeout_ms: u64,
    /// Extra attempts after the first one.
    pub retries: u32,
    pub max_concurrent: usize,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_ms: u64,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        AnnotateConfig {
            url: String::new(),
            model: "gpt-4o".into(),
            prompt: DEFAULT_PROMPT.into(),
            timeout_ms: 30_000,
            retries: 3,
            max_concurrent: 4,
            backoff_ms: 250,
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    prompt: &'a str,
    images: Vec<String>,
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

enum Failure {
    Retry(String),
    Fatal(AnnotateError),
}

/// Thread-safe client; at most `max_concurrent` requests are in flight.
pub struct Annotator {
    cfg: AnnotateConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    slots: Semaphore,
}

impl Annotator {
    pub fn new(cfg: AnnotateConfig) -> Result<Self, AnnotateError> {
        if cfg.url.is_empty() {
            return Err(AnnotateError::Config("annotate.url is not set".into()));
        }
        if cfg.max_concurrent == 0 {
            return Err(AnnotateError::Config("max_concurrent must be at least 1".into()));
        }
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build();
        Ok(Annotator {
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            slots: Semaphore {
                free: Mutex::new(cfg.max_concurrent),
                cv: Condvar::new(),
            },
            agent,
            cfg,
        })
    }

    pub fn config(&self) -> &AnnotateConfig {
        &self.cfg
    }

    /// Request body for `images`, as sent on the wire.
    pub fn request_body(&self, images: &[ViewImage]) -> serde_json::Value {
        serde_json::to_value(Request {
            model: &self.cfg.model,
            prompt: &self.cfg.prompt,
            images: images.iter().map(|i| STANDARD.encode(i.to_pgm())).collect(),
        })
        .expect("serializable request")
    }

    pub fn annotate(&self, images: &[ViewImage]) -> Result<String, AnnotateError> {
        let body = self.request_body(images);
        let _permit = self.slots.acquire();
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.send(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(msg)) => {
                    if attempt > self.cfg.retries {
                        return Err(AnnotateError::Transport {
                            attempts: attempt,
                            msg,
                        });
                    }
                    let delay = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                    thread::sleep(Duration::from_millis(delay));
                }
            }
        }
    }

    fn send(&self, body: &serde_json::Value) -> Result<String, Failure> {
        let mut req = self.agent.post(&self.cfg.url);
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) if code >= 500 || code == 429 => {
                return Err(Failure::Retry(format!("HTTP {code}")));
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(Failure::Fatal(AnnotateError::Transport {
                    attempts: 1,
                    msg: format!("HTTP {code}"),
                }));
            }
            Err(ureq::Error::Transport(t)) => return Err(Failure::Retry(t.to_string())),
        };
        let value: serde_json::Value = resp
            .into_json()
            .map_err(|e| Failure::Fatal(AnnotateError::Protocol(e.to_string())))?;
        value
            .get("text")
            .and_then(|t| t.as_str())
            .map(str::to_string)
            .ok_or_else(|| {
                Failure::Fatal(AnnotateError::Protocol(
                    "response has no string field \"text\"".into(),
                ))
            })
    }
}
