//! Chat-completion access.
//!
//! Two backends share the [`ChatBackend`] trait: an HTTP client for
//! OpenAI-style `/chat/completions` endpoints, and a scripted backend that
//! replays newline-delimited JSON transcripts of `{digest, reply}` records.
//! [`RecordingBackend`] wraps either one and captures a replayable
//! transcript.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GatewayError;
use crate::prompt::{ChatMessage, ChatTranscript, Role};

pub const MAX_RETRIES: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: ChatTranscript,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(messages: ChatTranscript, model: impl Into<String>) -> Self {
        Self {
            messages,
            model: model.into(),
            temperature: 0.0,
            max_tokens: 2048,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.messages.first() {
            None => return Err(GatewayError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::System => {
                return Err(GatewayError::InvalidRequest(
                    "the first message must be the system message".into(),
                ))
            }
            _ => {}
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 over role and content of every message, hex encoded.
    pub fn digest(&self) -> String {
        message_digest(&self.messages)
    }
}

pub fn message_digest(messages: &[ChatMessage]) -> String {
    let mut hasher = Sha256::new();
    for m in messages {
        hasher.update(m.role.as_str().as_bytes());
        hasher.update([0x1f]);
        hasher.update(m.content.as_bytes());
        hasher.update([0x1e]);
    }
    hex::encode(hasher.finalize())
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError>;

    /// Short human-readable description for manifests.
    fn describe(&self) -> String;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Http(HttpConfig),
    Scripted(ScriptedConfig),
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        match self {
            BackendConfig::Http(c) => c.validate(),
            BackendConfig::Scripted(_) => Ok(()),
        }
    }

    pub fn connect(&self) -> Result<Box<dyn ChatBackend>, GatewayError> {
        self.validate()?;
        Ok(match self {
            BackendConfig::Http(c) => Box::new(HttpBackend::new(c.clone())?),
            BackendConfig::Scripted(c) => Box::new(ScriptedBackend::from_config(c)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint_url: String,
    /// Environment variable holding the API key. Keys never live in config
    /// files.
    pub api_key_env: Option<String>,
    pub timeout_seconds: f64,
    pub retry_count: u32,
    pub retry_backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            timeout_seconds: 120.0,
            retry_count: 3,
            retry_backoff_ms: 1000,
            max_in_flight: 4,
        }
    }
}

impl HttpConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.retry_count > MAX_RETRIES {
            return Err(GatewayError::InvalidConfig(format!(
                "retry_count {} exceeds {MAX_RETRIES}",
                self.retry_count
            )));
        }
        if !(self.timeout_seconds > 0.0) {
            return Err(GatewayError::InvalidConfig("timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::InvalidConfig("max_in_flight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    /// Match replies by request digest, falling back to the next unused
    /// record in file order.
    #[default]
    Digest,
    /// Serve records strictly in file order.
    Positional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedConfig {
    pub transcript_path: PathBuf,
    #[serde(default)]
    pub mode: ReplayMode,
}

/// One line of a transcript file. Hand-written transcripts may omit the
/// digest; such records only match positionally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRecord {
    #[serde(default)]
    pub digest: Option<String>,
    pub reply: String,
}

impl ScriptRecord {
    pub fn positional(reply: impl Into<String>) -> Self {
        Self {
            digest: None,
            reply: reply.into(),
        }
    }
}

pub fn load_transcript(path: &Path) -> Result<Vec<ScriptRecord>, GatewayError> {
    let file = fs::File::open(path)?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| GatewayError::TranscriptFormat {
            line: i + 1,
            detail: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Writes records as newline-delimited JSON. An empty session yields an
/// empty file.
pub fn record_session(records: &[ScriptRecord], path: &Path) -> Result<(), GatewayError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut out = fs::File::create(path)?;
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Deterministic replay of recorded replies.
#[derive(Debug)]
pub struct ScriptedBackend {
    records: Vec<ScriptRecord>,
    mode: ReplayMode,
    label: String,
    consumed: Mutex<Vec<bool>>,
}

impl ScriptedBackend {
    pub fn new(records: Vec<ScriptRecord>, mode: ReplayMode) -> Self {
        let consumed = Mutex::new(vec![false; records.len()]);
        Self {
            label: format!("scripted:{} records", records.len()),
            records,
            mode,
            consumed,
        }
    }

    /// Positional script from bare replies.
    pub fn from_replies<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(
            replies.into_iter().map(ScriptRecord::positional).collect(),
            ReplayMode::Positional,
        )
    }

    pub fn from_config(config: &ScriptedConfig) -> Result<Self, GatewayError> {
        let mut backend = Self::new(load_transcript(&config.transcript_path)?, config.mode);
        backend.label = format!("scripted:{}", config.transcript_path.display());
        Ok(backend)
    }

    pub fn served(&self) -> usize {
        self.consumed.lock().expect("lock").iter().filter(|c| **c).count()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let mut consumed = self.consumed.lock().expect("scripted backend lock poisoned");
        let mut pick = None;
        if self.mode == ReplayMode::Digest {
            let digest = request.digest();
            pick = self
                .records
                .iter()
                .enumerate()
                .position(|(i, r)| !consumed[i] && r.digest.as_deref() == Some(digest.as_str()));
            if pick.is_none() {
                debug!("digest {digest} not in transcript; falling back to position");
            }
        }
        let pick = pick.or_else(|| consumed.iter().position(|c| !c));
        match pick {
            Some(i) => {
                consumed[i] = true;
                Ok(self.records[i].reply.clone())
            }
            None => Err(GatewayError::ScriptExhausted {
                served: consumed.len(),
            }),
        }
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// Captures `(digest, reply)` for every successful call of the inner
/// backend.
pub struct RecordingBackend<B> {
    inner: B,
    log: Mutex<Vec<ScriptRecord>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<ScriptRecord> {
        self.log.lock().expect("recording lock poisoned").clone()
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        record_session(&self.records(), path)
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let reply = self.inner.complete(request)?;
        self.log.lock().expect("recording lock poisoned").push(ScriptRecord {
            digest: Some(request.digest()),
            reply: reply.clone(),
        });
        Ok(reply)
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}

struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().expect("semaphore lock");
        while *n == 0 {
            n = self.freed.wait(n).expect("semaphore lock");
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore lock") += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

/// Extracts `choices[0].message.content` from a chat-completions response.
pub fn parse_completion(body: &str) -> Result<String, GatewayError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))
}

pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    in_flight: Semaphore,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                GatewayError::AuthError(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_seconds))
            .build()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            in_flight: Semaphore::new(config.max_in_flight),
            config,
            client,
            api_key,
        })
    }

    fn backoff(&self, attempt: u32) {
        let ms = self.config.retry_backoff_ms.saturating_mul(1 << attempt.min(6));
        if ms > 0 {
            thread::sleep(Duration::from_millis(ms));
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let body = WireRequest {
            model: &request.model,
            messages: request
                .messages
                .iter()
                .map(|m| WireMessage {
                    role: m.role.as_str(),
                    content: &m.content,
                })
                .collect(),
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let _permit = self.in_flight.acquire();
        let attempts = self.config.retry_count + 1;
        let mut last_transport = String::new();
        let mut rate_limited = false;
        for attempt in 0..attempts {
            if attempt > 0 {
                self.backoff(attempt - 1);
            }
            let mut builder = self.client.post(&self.config.endpoint_url).json(&body);
            if let Some(key) = &self.api_key {
                builder = builder.bearer_auth(key);
            }
            let response = match builder.send() {
                Ok(r) => r,
                Err(e) => {
                    warn!("chat request attempt {} failed: {e}", attempt + 1);
                    last_transport = e.to_string();
                    rate_limited = false;
                    continue;
                }
            };
            let status = response.status().as_u16();
            let text = response.text().map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
            match status {
                200..=299 => return parse_completion(&text),
                401 | 403 => return Err(GatewayError::AuthError(format!("HTTP {status}"))),
                429 => {
                    warn!("rate limited on attempt {}", attempt + 1);
                    rate_limited = true;
                }
                500..=599 => {
                    warn!("server error {status} on attempt {}", attempt + 1);
                    last_transport = format!("HTTP {status}");
                    rate_limited = false;
                }
                _ => return Err(GatewayError::HttpStatus { status, body: text }),
            }
        }
        if rate_limited {
            Err(GatewayError::RateLimited { attempts })
        } else {
            Err(GatewayError::Timeout {
                attempts,
                detail: last_transport,
            })
        }
    }

    fn describe(&self) -> String {
        format!("http:{}", self.config.endpoint_url)
    }
}
