//! Language-model backends.
//!
//! Every backend implements [`LanguageModel`]. [`ScriptedModel`] answers from
//! a fixed script, [`ReplayModel`] records or replays completions keyed by a
//! prompt digest, and [`HttpChatModel`] talks to an OpenAI-compatible
//! chat-completions endpoint.

use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::accounting::Tokenizer;

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 1024;
pub const DEFAULT_CONTEXT_LIMIT: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub prompt: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
}

impl ModelRequest {
    pub fn new(prompt: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            model_id: model_id.into(),
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            stop_sequences: Vec::new(),
        }
    }

    pub fn with_stop(mut self, stop: &[&str]) -> Self {
        self.stop_sequences = stop.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.prompt.is_empty() {
            return Err(ModelError::InvalidRequest("empty prompt".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ModelError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_output_tokens == 0 {
            return Err(ModelError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        digest(&self.prompt, &self.model_id, self.temperature)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("network error: {0}")]
    Network(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("no replay record for digest {digest}")]
    ReplayMiss { digest: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("prompt has {tokens} tokens, over the context limit of {limit}")]
    ContextLimit { tokens: u64, limit: u64 },
    #[error("scripted model has no response left")]
    ScriptExhausted,
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("replay store: {0}")]
    Store(String),
}

impl ModelError {
    fn retryable(&self) -> bool {
        matches!(self, ModelError::Network(_) | ModelError::RateLimited { .. })
            || matches!(self, ModelError::Http { status, .. } if *status >= 500)
    }
}

pub trait LanguageModel: Send + Sync {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError>;
}

impl<T: LanguageModel + ?Sized> LanguageModel for Arc<T> {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        (**self).complete(req)
    }
}

/// Stable replay key for a prompt under a given model and temperature:
/// hex SHA-256 of a length-prefixed encoding of the three inputs.
pub fn digest(prompt: &str, model_id: &str, temperature: f64) -> String {
    let mut h = Sha256::new();
    h.update(format!("{}:{}|{:.4}|{}:", model_id.len(), model_id, temperature, prompt.len()).as_bytes());
    h.update(prompt.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Cuts a completion at the earliest stop sequence, as a server would.
pub fn apply_stop(text: &str, stop: &[String]) -> String {
    let cut = stop.iter().filter(|s| !s.is_empty()).filter_map(|s| text.find(s.as_str())).min();
    match cut {
        Some(i) => text[..i].to_string(),
        None => text.to_string(),
    }
}

type Responder = Box<dyn Fn(&ModelRequest) -> Option<String> + Send + Sync>;

/// Deterministic backend: answers from a FIFO queue or a responder function.
/// Token counts come from the model's tokenizer.
pub struct ScriptedModel {
    tokenizer: Tokenizer,
    queue: Mutex<VecDeque<String>>,
    responder: Option<Responder>,
}

impl ScriptedModel {
    pub fn queue<I, S>(tokenizer: Tokenizer, responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { tokenizer, queue: Mutex::new(responses.into_iter().map(Into::into).collect()), responder: None }
    }

    /// `f` returning `None` is treated as an exhausted script.
    pub fn from_fn(tokenizer: Tokenizer, f: impl Fn(&ModelRequest) -> Option<String> + Send + Sync + 'static) -> Self {
        Self { tokenizer, queue: Mutex::new(VecDeque::new()), responder: Some(Box::new(f)) }
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl LanguageModel for ScriptedModel {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        req.validate()?;
        let raw = match &self.responder {
            Some(f) => f(req),
            None => self.queue.lock().unwrap().pop_front(),
        }
        .ok_or(ModelError::ScriptExhausted)?;
        let text = apply_stop(&raw, &req.stop_sequences);
        Ok(ModelResponse {
            input_tokens: self.tokenizer.count(&req.prompt),
            output_tokens: self.tokenizer.count(&text),
            text,
            latency_ms: 0,
        })
    }
}

/// One line of a replay fixture file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub digest: String,
    pub model_id: String,
    pub prompt: String,
    pub response_text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    Record,
    Replay,
    Passthrough,
}

/// Recorded completions keyed by digest. Reads are concurrent; inserts take
/// a write lock.
pub struct ReplayStore {
    mode: ReplayMode,
    entries: RwLock<IndexMap<String, ReplayRecord>>,
}

impl ReplayStore {
    pub fn new(mode: ReplayMode) -> Self {
        Self { mode, entries: RwLock::new(IndexMap::new()) }
    }

    pub fn mode(&self) -> ReplayMode {
        self.mode
    }

    /// Loads a JSONL fixture file. A missing file yields an empty store only
    /// in record mode.
    pub fn load(path: &Path, mode: ReplayMode) -> Result<Self, ModelError> {
        let store = Self::new(mode);
        if !path.exists() && mode == ReplayMode::Record {
            return Ok(store);
        }
        let text = fs::read_to_string(path).map_err(|e| ModelError::Store(format!("{}: {e}", path.display())))?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ReplayRecord = serde_json::from_str(line)
                .map_err(|e| ModelError::Store(format!("{}:{}: {e}", path.display(), i + 1)))?;
            store.insert(rec);
        }
        Ok(store)
    }

    /// Keeps the first record for a digest.
    pub fn insert(&self, rec: ReplayRecord) {
        self.entries.write().unwrap().entry(rec.digest.clone()).or_insert(rec);
    }

    pub fn get(&self, digest: &str) -> Option<ReplayRecord> {
        self.entries.read().unwrap().get(digest).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> Vec<ReplayRecord> {
        self.entries.read().unwrap().values().cloned().collect()
    }

    /// Writes every record as JSONL in insertion order.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let io = |e: std::io::Error| ModelError::Store(format!("{}: {e}", path.display()));
        let mut f = fs::File::create(path).map_err(io)?;
        for rec in self.entries.read().unwrap().values() {
            let line = serde_json::to_string(rec).map_err(|e| ModelError::Store(e.to_string()))?;
            writeln!(f, "{line}").map_err(io)?;
        }
        Ok(())
    }
}

/// Backend that serves from, or records into, a [`ReplayStore`].
pub struct ReplayModel {
    store: Arc<ReplayStore>,
    inner: Option<Arc<dyn LanguageModel>>,
}

impl ReplayModel {
    pub fn replay(store: Arc<ReplayStore>) -> Self {
        Self { store, inner: None }
    }

    /// Record and passthrough modes need an upstream model.
    pub fn wrapping(store: Arc<ReplayStore>, inner: Arc<dyn LanguageModel>) -> Self {
        Self { store, inner: Some(inner) }
    }

    pub fn store(&self) -> &Arc<ReplayStore> {
        &self.store
    }

    fn upstream(&self) -> Result<&Arc<dyn LanguageModel>, ModelError> {
        self.inner.as_ref().ok_or_else(|| ModelError::Store("record/passthrough mode needs an upstream model".into()))
    }
}

impl LanguageModel for ReplayModel {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        req.validate()?;
        let digest = req.digest();
        match self.store.mode() {
            ReplayMode::Replay => {
                let rec = self.store.get(&digest).ok_or(ModelError::ReplayMiss { digest })?;
                Ok(ModelResponse {
                    text: rec.response_text,
                    input_tokens: rec.input_tokens,
                    output_tokens: rec.output_tokens,
                    latency_ms: 0,
                })
            }
            ReplayMode::Record => {
                let resp = self.upstream()?.complete(req)?;
                self.store.insert(ReplayRecord {
                    digest,
                    model_id: req.model_id.clone(),
                    prompt: req.prompt.clone(),
                    response_text: resp.text.clone(),
                    input_tokens: resp.input_tokens,
                    output_tokens: resp.output_tokens,
                });
                Ok(resp)
            }
            ReplayMode::Passthrough => self.upstream()?.complete(req),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpModelConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for HttpModelConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            api_key: None,
            timeout: Duration::from_secs(60),
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
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
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    stop: &'a [String],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

/// OpenAI-compatible chat-completions client. The whole prompt is sent as a
/// single user message. Transport errors, 429 and 5xx are retried with
/// exponential backoff up to `max_attempts` attempts in total.
pub struct HttpChatModel {
    config: HttpModelConfig,
    client: reqwest::blocking::Client,
    tokenizer: Tokenizer,
}

impl HttpChatModel {
    pub fn new(config: HttpModelConfig, tokenizer: Tokenizer) -> Result<Self, ModelError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ModelError::Network(e.to_string()))?;
        Ok(Self { config, client, tokenizer })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        let body = ChatRequest {
            model: &req.model_id,
            messages: vec![ChatMessage { role: "user", content: &req.prompt }],
            temperature: req.temperature,
            max_tokens: req.max_output_tokens,
            stop: &req.stop_sequences,
        };
        let started = Instant::now();
        let mut call = self.client.post(self.url()).json(&body);
        if let Some(key) = &self.config.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| ModelError::Network(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(ModelError::RateLimited { attempts: 1 });
        }
        let text = resp.text().map_err(|e| ModelError::Network(e.to_string()))?;
        if !status.is_success() {
            return Err(ModelError::Http { status: status.as_u16(), body: text });
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| ModelError::Malformed(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ModelError::Malformed("no choices in response".into()))?;
        let (input_tokens, output_tokens) = match parsed.usage {
            Some(u) => (u.prompt_tokens, u.completion_tokens),
            None => (self.tokenizer.count(&req.prompt), self.tokenizer.count(&content)),
        };
        Ok(ModelResponse {
            text: content,
            input_tokens,
            output_tokens,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

impl LanguageModel for HttpChatModel {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ModelError> {
        req.validate()?;
        let attempts = self.config.max_attempts.max(1);
        let mut delay = self.config.initial_backoff;
        let mut last = ModelError::Network("no attempt made".into());
        for n in 1..=attempts {
            match self.attempt(req) {
                Ok(resp) => return Ok(resp),
                Err(e) if e.retryable() => {
                    tracing::warn!(attempt = n, error = %e, "model call failed");
                    last = match e {
                        ModelError::RateLimited { .. } => ModelError::RateLimited { attempts: n },
                        other => other,
                    };
                    if n < attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }
}
