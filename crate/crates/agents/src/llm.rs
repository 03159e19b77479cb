//! Chat-completion access behind one trait.
//!
//! [`ScriptedBackend`] replays responses from a fixture keyed by
//! `(role, day, step)`, which makes whole pipeline runs reproducible
//! offline. [`HttpBackend`] speaks the OpenAI-compatible chat-completions
//! wire format with bounded retries and an in-flight limit.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::protocol::{Role, ToolCallRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatRole {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
    /// Present on tool results, and on assistant turns that requested a call.
    pub tool_call: Option<ToolCallRecord>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::System,
            content: content.into(),
            tool_call: None,
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::User,
            content: content.into(),
            tool_call: None,
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Assistant,
            content: content.into(),
            tool_call: None,
        }
    }

    pub fn tool_request(record: ToolCallRecord) -> Self {
        Self {
            role: ChatRole::Assistant,
            content: String::new(),
            tool_call: Some(record),
        }
    }

    pub fn tool_result(record: ToolCallRecord) -> Self {
        Self {
            role: ChatRole::Tool,
            content: record.observation.clone(),
            tool_call: Some(record),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Quick,
    Deep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelTier {
    pub tier: Tier,
    pub model_id: String,
}

/// Model ids for both tiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierConfig {
    pub quick: String,
    pub deep: String,
}

impl Default for TierConfig {
    fn default() -> Self {
        Self {
            quick: "quick-model".into(),
            deep: "deep-model".into(),
        }
    }
}

impl TierConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        for (tier, id) in [("quick", &self.quick), ("deep", &self.deep)] {
            if id.trim().is_empty() {
                return Err(LlmError::Config(format!(
                    "no model id configured for the {tier} tier"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, tier: Tier) -> ModelTier {
        let model_id = match tier {
            Tier::Quick => self.quick.clone(),
            Tier::Deep => self.deep.clone(),
        };
        ModelTier { tier, model_id }
    }
}

/// What a request is for; drives tier routing and the request-log audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Retrieval,
    Synthesis,
    Argument,
    Verdict,
    Decision,
}

impl Purpose {
    pub fn tier(self) -> Tier {
        match self {
            Purpose::Retrieval => Tier::Quick,
            _ => Tier::Deep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestOrigin {
    pub role: Role,
    pub day: NaiveDate,
    pub purpose: Purpose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    /// JSON Schema for the argument object.
    pub parameters: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub origin: RequestOrigin,
    pub tier: ModelTier,
    pub messages: Vec<ChatMessage>,
    pub available_tools: Vec<ToolDescriptor>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionResponse {
    Text(String),
    ToolCalls(Vec<ToolCall>),
}

impl CompletionResponse {
    pub fn kind(&self) -> &'static str {
        match self {
            CompletionResponse::Text(_) => "text",
            CompletionResponse::ToolCalls(_) => "tool_calls",
        }
    }

    fn check(&self) -> Result<(), LlmError> {
        match self {
            CompletionResponse::Text(t) if t.trim().is_empty() => Err(LlmError::Malformed(
                "response has neither text nor tool calls".into(),
            )),
            CompletionResponse::ToolCalls(c) if c.is_empty() => Err(LlmError::Malformed(
                "response has an empty tool call list".into(),
            )),
            CompletionResponse::ToolCalls(c) => match c.iter().find(|c| c.name.trim().is_empty()) {
                Some(_) => Err(LlmError::Malformed("tool call without a name".into())),
                None => Ok(()),
            },
            CompletionResponse::Text(_) => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed upstream payload: {0}")]
    Malformed(String),
    #[error("unknown model id {0:?}")]
    UnknownModel(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("authentication failed (HTTP {status}): {body}")]
    Auth { status: u16, body: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("network failure after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("upstream returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("script has no entry for role={role} day={day} step={step}")]
    ScriptMissing {
        role: Role,
        day: NaiveDate,
        step: u32,
    },
    #[error("script {path}: {message}")]
    ScriptLoad { path: String, message: String },
}

pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;
    fn send(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError>;
}

/// Validates the request, dispatches it, and validates the response.
pub fn complete(
    backend: &dyn ChatBackend,
    request: &CompletionRequest,
) -> Result<CompletionResponse, LlmError> {
    match request.messages.first() {
        None => {
            return Err(LlmError::InvalidRequest(
                "messages must not be empty".into(),
            ))
        }
        Some(m) if m.role != ChatRole::System => {
            return Err(LlmError::InvalidRequest(
                "first message must have role system".into(),
            ))
        }
        _ => {}
    }
    if let Some(m) = request
        .messages
        .iter()
        .find(|m| m.role == ChatRole::Tool && m.tool_call.is_none())
    {
        return Err(LlmError::InvalidRequest(format!(
            "tool message without a tool call: {:?}",
            m.content
        )));
    }
    if !(request.temperature.is_finite() && request.temperature >= 0.0) {
        return Err(LlmError::InvalidRequest(format!(
            "temperature {} must be >= 0",
            request.temperature
        )));
    }
    if request.tier.model_id.trim().is_empty() {
        return Err(LlmError::UnknownModel(request.tier.model_id.clone()));
    }
    let response = backend.send(request)?;
    response.check()?;
    Ok(response)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptEntry {
    role: Role,
    day: NaiveDate,
    step: u32,
    response: ScriptResponse,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptResponse {
    text: Option<String>,
    tool_calls: Option<Vec<ScriptCall>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptCall {
    name: String,
    #[serde(default)]
    arguments: Map<String, Value>,
}

/// Replays recorded responses. Each `(role, day)` pair keeps its own step
/// counter, so concurrent roles never interfere.
pub struct ScriptedBackend {
    responses: HashMap<(Role, NaiveDate, u32), CompletionResponse>,
    cursors: Mutex<HashMap<(Role, NaiveDate), u32>>,
}

impl ScriptedBackend {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::ScriptLoad {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, LlmError> {
        let err = |message: String| LlmError::ScriptLoad {
            path: origin.to_string(),
            message,
        };
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        let mut responses = HashMap::new();
        for (i, e) in entries.into_iter().enumerate() {
            let key = (e.role, e.day, e.step);
            let response = match (e.response.text, e.response.tool_calls) {
                (Some(t), None) => CompletionResponse::Text(t),
                (None, Some(calls)) => CompletionResponse::ToolCalls(
                    calls
                        .into_iter()
                        .enumerate()
                        .map(|(j, c)| ToolCall {
                            id: format!("call_{}_{}_{}_{j}", e.role.key(), e.day, e.step),
                            name: c.name,
                            arguments: c.arguments,
                        })
                        .collect(),
                ),
                _ => {
                    return Err(err(format!(
                        "entry {i}: response needs exactly one of text / tool_calls"
                    )))
                }
            };
            if responses.insert(key, response).is_some() {
                return Err(err(format!(
                    "duplicate key role={} day={} step={}",
                    e.role, e.day, e.step
                )));
            }
        }
        Ok(Self {
            responses,
            cursors: Mutex::new(HashMap::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn send(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let RequestOrigin { role, day, .. } = request.origin;
        let step = {
            let mut cursors = self.cursors.lock().expect("cursor lock");
            let c = cursors.entry((role, day)).or_insert(0);
            let step = *c;
            *c += 1;
            step
        };
        self.responses
            .get(&(role, day, step))
            .cloned()
            .ok_or(LlmError::ScriptMissing { role, day, step })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestLogEntry {
    pub role: Role,
    pub day: NaiveDate,
    pub purpose: Purpose,
    pub tier: Tier,
    pub model_id: String,
    pub response_kind: Option<String>,
}

/// Wraps a backend and keeps a log of every request it sees.
pub struct RecordingBackend<B> {
    inner: B,
    log: Mutex<Vec<RequestLogEntry>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn log(&self) -> Vec<RequestLogEntry> {
        self.log.lock().expect("log lock").clone()
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn send(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        (**self).send(request)
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn send(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let result = self.inner.send(request);
        self.log.lock().expect("log lock").push(RequestLogEntry {
            role: request.origin.role,
            day: request.origin.day,
            purpose: request.origin.purpose,
            tier: request.tier.tier,
            model_id: request.tier.model_id.clone(),
            response_kind: result.as_ref().ok().map(|r| r.kind().to_string()),
        });
        result
    }
}

pub const DEFAULT_CREDENTIAL_ENV: &str = "TRADECRAFT_API_KEY";

/// Connection settings for [`HttpBackend`]. The credential itself is read
/// from the environment variable named by `credential_env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub credential_env: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            credential_env: DEFAULT_CREDENTIAL_ENV.into(),
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
            timeout_secs: 120,
            max_in_flight: 4,
        }
    }
}

struct Gate {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.active.lock().expect("gate lock");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("gate lock");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().expect("gate lock") -= 1;
        self.0.freed.notify_one();
    }
}

enum Attempt {
    Done(Result<CompletionResponse, LlmError>),
    Retry {
        error: LlmError,
        wait: Option<Duration>,
    },
}

pub struct HttpBackend {
    config: HttpConfig,
    credential: String,
    models: Vec<String>,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl HttpBackend {
    /// Reads the credential from the environment. `models` lists the ids
    /// this backend will accept.
    pub fn from_env(config: HttpConfig, models: Vec<String>) -> Result<Self, LlmError> {
        let credential = std::env::var(&config.credential_env)
            .ok()
            .filter(|v| !v.trim().is_empty())
            .ok_or_else(|| LlmError::MissingCredential(config.credential_env.clone()))?;
        Self::new(config, credential, models)
    }

    pub fn new(
        config: HttpConfig,
        credential: String,
        models: Vec<String>,
    ) -> Result<Self, LlmError> {
        if config.max_in_flight == 0 {
            return Err(LlmError::Config("max_in_flight must be at least 1".into()));
        }
        reqwest::Url::parse(&config.endpoint)
            .map_err(|e| LlmError::Config(format!("endpoint {:?}: {e}", config.endpoint)))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        let gate = Gate {
            limit: config.max_in_flight,
            active: Mutex::new(0),
            freed: Condvar::new(),
        };
        Ok(Self {
            config,
            credential,
            models,
            client,
            gate,
        })
    }

    fn url(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.endpoint.trim_end_matches('/')
        )
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .config
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.config.max_backoff_ms);
        Duration::from_millis(ms)
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let sent = self
            .client
            .post(self.url())
            .bearer_auth(&self.credential)
            .json(body)
            .send();
        let resp = match sent {
            Ok(r) => r,
            Err(e) if e.is_timeout() => {
                return Attempt::Retry {
                    error: LlmError::Timeout { attempts: 0 },
                    wait: None,
                }
            }
            Err(e) => {
                return Attempt::Retry {
                    error: LlmError::Network {
                        attempts: 0,
                        message: e.to_string(),
                    },
                    wait: None,
                }
            }
        };
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => {
                return Attempt::Retry {
                    error: LlmError::Timeout { attempts: 0 },
                    wait: None,
                }
            }
            Err(e) => {
                return Attempt::Retry {
                    error: LlmError::Network {
                        attempts: 0,
                        message: e.to_string(),
                    },
                    wait: None,
                }
            }
        };
        match status {
            200..=299 => Attempt::Done(parse_wire_response(&text)),
            401 | 403 => Attempt::Done(Err(LlmError::Auth { status, body: text })),
            404 if text.contains("model") => Attempt::Done(Err(LlmError::UnknownModel(
                body["model"].as_str().unwrap_or_default().to_string(),
            ))),
            429 => Attempt::Retry {
                error: LlmError::RateLimited { attempts: 0 },
                wait: retry_after,
            },
            500..=599 => Attempt::Retry {
                error: LlmError::Status { status, body: text },
                wait: retry_after,
            },
            _ => Attempt::Done(Err(LlmError::Status { status, body: text })),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn send(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        if !self.models.contains(&request.tier.model_id) {
            return Err(LlmError::UnknownModel(request.tier.model_id.clone()));
        }
        let body = wire_request(request);
        let _permit = self.gate.acquire();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Attempt::Done(r) => return r,
                Attempt::Retry { error, wait } => {
                    if attempts > self.config.max_retries {
                        return Err(match error {
                            LlmError::RateLimited { .. } => LlmError::RateLimited { attempts },
                            LlmError::Timeout { .. } => LlmError::Timeout { attempts },
                            LlmError::Network { message, .. } => {
                                LlmError::Network { attempts, message }
                            }
                            other => other,
                        });
                    }
                    let wait = wait
                        .map(|w| w.min(Duration::from_millis(self.config.max_backoff_ms)))
                        .unwrap_or_else(|| self.backoff(attempts - 1));
                    tracing::warn!(attempt = attempts, error = %error, "retrying chat completion");
                    thread::sleep(wait);
                }
            }
        }
    }
}

/// The OpenAI-compatible request body for `request`.
pub fn wire_request(request: &CompletionRequest) -> Value {
    let messages: Vec<Value> = request
        .messages
        .iter()
        .map(|m| match (m.role, &m.tool_call) {
            (ChatRole::Assistant, Some(call)) => json!({
                "role": "assistant",
                "content": Value::Null,
                "tool_calls": [{
                    "id": call.call_id,
                    "type": "function",
                    "function": {
                        "name": call.tool_name,
                        "arguments": Value::Object(call.arguments.clone()).to_string(),
                    },
                }],
            }),
            (ChatRole::Tool, Some(call)) => json!({
                "role": "tool",
                "tool_call_id": call.call_id,
                "content": m.content,
            }),
            (role, _) => json!({"role": role, "content": m.content}),
        })
        .collect();
    let mut body = json!({
        "model": request.tier.model_id,
        "messages": messages,
        "temperature": request.temperature,
    });
    if !request.available_tools.is_empty() {
        body["tools"] = request
            .available_tools
            .iter()
            .map(|t| {
                json!({
                    "type": "function",
                    "function": {"name": t.name, "description": t.description, "parameters": t.parameters},
                })
            })
            .collect();
    }
    body
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
    #[serde(default)]
    tool_calls: Option<Vec<WireToolCall>>,
}

#[derive(Deserialize)]
struct WireToolCall {
    id: String,
    function: WireFunction,
}

#[derive(Deserialize)]
struct WireFunction {
    name: String,
    arguments: String,
}

/// Maps a chat-completions response body onto [`CompletionResponse`].
pub fn parse_wire_response(body: &str) -> Result<CompletionResponse, LlmError> {
    let wire: WireResponse =
        serde_json::from_str(body).map_err(|e| LlmError::Malformed(e.to_string()))?;
    let message = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::Malformed("no choices".into()))?
        .message;
    match message.tool_calls.filter(|c| !c.is_empty()) {
        Some(calls) => calls
            .into_iter()
            .map(|c| {
                let arguments = if c.function.arguments.trim().is_empty() {
                    Map::new()
                } else {
                    match serde_json::from_str::<Value>(&c.function.arguments) {
                        Ok(Value::Object(m)) => m,
                        _ => {
                            return Err(LlmError::Malformed(format!(
                                "arguments for {} are not a JSON object",
                                c.function.name
                            )))
                        }
                    }
                };
                Ok(ToolCall {
                    id: c.id,
                    name: c.function.name,
                    arguments,
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(CompletionResponse::ToolCalls),
        None => match message.content {
            Some(t) if !t.trim().is_empty() => Ok(CompletionResponse::Text(t)),
            _ => Err(LlmError::Malformed(
                "response has neither text nor tool calls".into(),
            )),
        },
    }
}
