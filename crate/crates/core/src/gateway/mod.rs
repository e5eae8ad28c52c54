//! Chat-completion gateway.
//!
//! Every model call goes through [`Gateway::complete`], which forwards a
//! single-message request to a [`ChatBackend`], counts the call and appends an
//! audit record to the artifact log. Two backends exist: [`HttpBackend`] for
//! an OpenAI-style chat-completion endpoint and [`MockBackend`], which replays
//! a fixed script.

pub mod prompts;
pub mod stub;

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prompts::TemplateId;

pub const DEFAULT_MAX_TOKENS: u32 = 2000;

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("mock script exhausted at call {call}")]
    ScriptExhausted { call: usize },
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub template: TemplateId,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_chars: usize,
    pub response_chars: usize,
    pub latency_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(req)
    }
}

/// One scripted response. Keyed entries (`match` set) answer any prompt
/// containing the key; unkeyed entries are served in order. Entries are used
/// once unless `repeat` is set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    pub response: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repeat: bool,
}

impl ScriptEntry {
    pub fn once(response: impl Into<String>) -> Self {
        ScriptEntry {
            key: None,
            response: response.into(),
            repeat: false,
        }
    }

    pub fn always(response: impl Into<String>) -> Self {
        ScriptEntry {
            repeat: true,
            ..ScriptEntry::once(response)
        }
    }

    pub fn keyed(key: impl Into<String>, response: impl Into<String>) -> Self {
        ScriptEntry {
            key: Some(key.into()),
            ..ScriptEntry::once(response)
        }
    }
}

#[derive(Debug, Default)]
struct MockState {
    ordered: VecDeque<ScriptEntry>,
    keyed: Vec<(ScriptEntry, bool)>,
    prompts: Vec<String>,
}

/// Deterministic backend replaying a script. Calls are serialized.
#[derive(Debug, Default)]
pub struct MockBackend {
    state: Mutex<MockState>,
}

impl MockBackend {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut state = MockState::default();
        for e in entries {
            if e.key.is_some() {
                state.keyed.push((e, false));
            } else {
                state.ordered.push_back(e);
            }
        }
        MockBackend {
            state: Mutex::new(state),
        }
    }

    /// Plain responses served once each, in order.
    pub fn from_responses<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::new(responses.into_iter().map(ScriptEntry::once))
    }

    /// Reads a script file: one JSON value per line, either a string or a
    /// [`ScriptEntry`] object. Blank lines are ignored.
    pub fn from_script_file(path: &Path) -> Result<Self, GatewayError> {
        let file = File::open(path).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| GatewayError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| GatewayError::Config(format!("script line {}: {e}", i + 1)))?;
            let entry = match value {
                serde_json::Value::String(s) => ScriptEntry::once(s),
                other => serde_json::from_value(other)
                    .map_err(|e| GatewayError::Config(format!("script line {}: {e}", i + 1)))?,
            };
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    /// Prompts received so far, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.state.lock().expect("mock state").prompts.clone()
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let mut state = self.state.lock().expect("mock state");
        state.prompts.push(req.prompt.clone());
        let call = state.prompts.len();
        let hit = state
            .keyed
            .iter_mut()
            .find(|(e, used)| (!*used || e.repeat) && e.key.as_deref().is_some_and(|k| req.prompt.contains(k)));
        if let Some((entry, used)) = hit {
            *used = true;
            return Ok(entry.response.clone());
        }
        match state.ordered.front() {
            Some(e) if e.repeat => Ok(e.response.clone()),
            Some(_) => Ok(state.ordered.pop_front().expect("front exists").response),
            None => Err(GatewayError::ScriptExhausted { call }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Full URL of the chat-completion endpoint.
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: Option<String>,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            token_env: None,
            max_retries: 3,
            backoff_ms: 500,
            timeout_secs: 120,
            max_in_flight: 4,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn acquire(&self) -> LimiterGuard<'_> {
        let mut free = self.free.lock().expect("limiter");
        while *free == 0 {
            free = self.cv.wait(free).expect("limiter");
        }
        *free -= 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("limiter") += 1;
        self.0.cv.notify_one();
    }
}

/// OpenAI-style chat-completion client with retry and backoff.
pub struct HttpBackend {
    config: HttpConfig,
    token: Option<String>,
    agent: ureq::Agent,
    limiter: Limiter,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, GatewayError> {
        let token = match &config.token_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| GatewayError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = Limiter {
            free: Mutex::new(config.max_in_flight.max(1)),
            cv: Condvar::new(),
        };
        Ok(HttpBackend {
            config,
            token,
            agent,
            limiter,
        })
    }

    fn attempt(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let body = serde_json::json!({
            "model": req.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.token {
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = call
            .send_json(&body)
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(GatewayError::Auth(text)),
            _ => return Err(GatewayError::Status { status, body: text }),
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| GatewayError::Malformed(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Malformed("missing choices[0].message.content".into()))
    }
}

fn is_transient(e: &GatewayError) -> bool {
    match e {
        GatewayError::Transport(_) => true,
        GatewayError::Status { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let _slot = self.limiter.acquire();
        let mut attempt = 0;
        loop {
            match self.attempt(req) {
                Ok(text) => return Ok(text),
                Err(e) if is_transient(&e) && attempt < self.config.max_retries => {
                    let delay = self.config.backoff_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("request failed ({e}), retry {} in {delay} ms", attempt + 1);
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[derive(Serialize)]
struct ArtifactRecord<'a> {
    timestamp_ms: u128,
    template_id: TemplateId,
    prompt: &'a str,
    response: Option<&'a str>,
    error: Option<String>,
    latency_ms: u64,
}

/// Front door for all model calls.
pub struct Gateway {
    backend: Box<dyn ChatBackend>,
    model_id: String,
    calls: AtomicUsize,
    artifacts: Option<Mutex<File>>,
}

impl Gateway {
    pub fn new(backend: Box<dyn ChatBackend>, model_id: impl Into<String>) -> Self {
        Gateway {
            backend,
            model_id: model_id.into(),
            calls: AtomicUsize::new(0),
            artifacts: None,
        }
    }

    pub fn mock(backend: MockBackend) -> Self {
        Gateway::new(Box::new(backend), "mock")
    }

    /// Appends one JSON record per call to `path`.
    pub fn with_artifact_log(mut self, path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.artifacts = Some(Mutex::new(file));
        Ok(self)
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// Number of completions requested so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn request(&self, template: TemplateId, prompt: String, temperature: f64, max_tokens: u32) -> ChatRequest {
        ChatRequest {
            template,
            prompt,
            temperature,
            max_tokens,
            model_id: self.model_id.clone(),
        }
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let started = Instant::now();
        let result = if req.prompt.is_empty() {
            Err(GatewayError::Config("empty prompt".into()))
        } else {
            self.backend.complete(req).and_then(|text| {
                if text.trim().is_empty() {
                    Err(GatewayError::EmptyResponse)
                } else {
                    Ok(text)
                }
            })
        };
        let latency_ms = started.elapsed().as_millis() as u64;
        self.record(req, &result, latency_ms);
        result.map(|text| ChatResponse {
            usage: Usage {
                prompt_chars: req.prompt.chars().count(),
                response_chars: text.chars().count(),
                latency_ms,
            },
            text,
        })
    }

    fn record(&self, req: &ChatRequest, result: &Result<String, GatewayError>, latency_ms: u64) {
        let Some(file) = &self.artifacts else { return };
        let rec = ArtifactRecord {
            timestamp_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            template_id: req.template,
            prompt: &req.prompt,
            response: result.as_ref().ok().map(String::as_str),
            error: result.as_ref().err().map(|e| e.to_string()),
            latency_ms,
        };
        let line = serde_json::to_string(&rec).expect("record serializes");
        let mut f = file.lock().expect("artifact log");
        if let Err(e) = writeln!(f, "{line}") {
            log::error!("could not write artifact log: {e}");
        }
    }
}
