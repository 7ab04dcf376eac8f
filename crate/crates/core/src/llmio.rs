//! Model backends: chat messages, tool calls, usage accounting.
//!
//! Three backends implement the same trait: an HTTP backend speaking a
//! chat-completions-style wire protocol, a scripted backend that replays
//! fixture responses keyed by request hash, and a recorder that pairs an
//! ordered list of authored responses with the requests actually made,
//! producing a fixture file for later scripted runs.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::util::normalize_ws;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn assistant_tool_calls(calls: Vec<ToolCall>) -> Self {
        Self {
            role: Role::Assistant,
            content: String::new(),
            tool_calls: calls,
            tool_call_id: None,
        }
    }

    pub fn tool(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            role: Role::Tool,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: Some(call_id.into()),
        }
    }
}

/// Tool specification in the backend's tool-calling wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    /// JSON schema of the arguments record.
    pub parameters: serde_json::Value,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn new(prompt_tokens: u64, completion_tokens: u64) -> Self {
        Self {
            prompt_tokens,
            completion_tokens,
        }
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl std::ops::Add for Usage {
    type Output = Usage;
    fn add(self, rhs: Usage) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
        }
    }
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        *self = *self + rhs;
    }
}

/// Component-wise sum over a run log.
pub fn usage_total(log: &[Usage]) -> Usage {
    log.iter().copied().fold(Usage::default(), |a, b| a + b)
}

fn default_temperature() -> f64 {
    1.0
}
fn default_top_p() -> f64 {
    0.95
}
fn default_top_k() -> u32 {
    40
}
fn default_max_tokens() -> u32 {
    16384
}
fn default_max_retries() -> u32 {
    3
}
fn default_api_key_env() -> String {
    "SCHEMALINK_API_KEY".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_top_k")]
    pub top_k: u32,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            temperature: default_temperature(),
            top_p: default_top_p(),
            top_k: default_top_k(),
            max_tokens: default_max_tokens(),
            max_retries: default_max_retries(),
            api_key_env: default_api_key_env(),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 {
            return Err(Error::InvalidArgument("temperature must be >= 0".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::InvalidArgument("top_p must be in (0, 1]".into()));
        }
        if self.max_tokens < 1 {
            return Err(Error::InvalidArgument("max_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

pub trait Backend: Send + Sync {
    fn complete(
        &self,
        messages: &[ChatMessage],
        tools: &[ToolSpec],
    ) -> Result<(ChatMessage, Usage)>;
}

/// Content hash identifying one request. Whitespace inside message content is
/// normalized so prompt reflow does not break fixtures.
pub fn request_key(messages: &[ChatMessage], tools: &[ToolSpec]) -> String {
    let mut hasher = Sha256::new();
    for m in messages {
        hasher.update(m.role.as_str().as_bytes());
        hasher.update([0x1f]);
        hasher.update(normalize_ws(&m.content).as_bytes());
        for c in &m.tool_calls {
            hasher.update([0x1d]);
            hasher.update(c.name.as_bytes());
            hasher.update([0x1d]);
            hasher.update(normalize_ws(&c.arguments.to_string()).as_bytes());
        }
        hasher.update([0x1e]);
    }
    for t in tools {
        hasher.update(t.name.as_bytes());
        hasher.update([0x1f]);
    }
    hex::encode(&hasher.finalize()[..16])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptedResponse {
    pub message: ChatMessage,
    pub usage: Usage,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FixtureFile {
    #[serde(default)]
    pub version: u32,
    pub responses: BTreeMap<String, ScriptedResponse>,
}

/// Deterministic backend replaying fixture responses keyed by request hash.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    fixture: FixtureFile,
}

impl ScriptedBackend {
    pub fn new(fixture: FixtureFile) -> Self {
        Self { fixture }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let fixture: FixtureFile = serde_json::from_str(&text)?;
        Ok(Self { fixture })
    }

    pub fn insert(&mut self, key: String, response: ScriptedResponse) {
        self.fixture.responses.insert(key, response);
    }
}

impl Backend for ScriptedBackend {
    fn complete(
        &self,
        messages: &[ChatMessage],
        tools: &[ToolSpec],
    ) -> Result<(ChatMessage, Usage)> {
        let key = request_key(messages, tools);
        let r = self
            .fixture
            .responses
            .get(&key)
            .ok_or(Error::FixtureMiss(key))?;
        Ok((r.message.clone(), r.usage))
    }
}

/// Pairs an ordered list of authored responses with the requests a pipeline
/// run actually makes, recording request-hash -> response. `finish` yields a
/// fixture usable by [`ScriptedBackend`].
pub struct ScriptRecorder {
    inner: Mutex<RecorderState>,
}

struct RecorderState {
    pending: std::vec::IntoIter<ScriptedResponse>,
    recorded: BTreeMap<String, ScriptedResponse>,
}

impl ScriptRecorder {
    pub fn new(responses: Vec<ScriptedResponse>) -> Self {
        Self {
            inner: Mutex::new(RecorderState {
                pending: responses.into_iter(),
                recorded: BTreeMap::new(),
            }),
        }
    }

    pub fn finish(self) -> FixtureFile {
        let state = self.inner.into_inner().unwrap();
        FixtureFile {
            version: 1,
            responses: state.recorded,
        }
    }
}

impl Backend for ScriptRecorder {
    fn complete(
        &self,
        messages: &[ChatMessage],
        tools: &[ToolSpec],
    ) -> Result<(ChatMessage, Usage)> {
        let key = request_key(messages, tools);
        let mut state = self.inner.lock().unwrap();
        let response = state
            .pending
            .next()
            .ok_or_else(|| Error::Backend("script recorder ran out of responses".into()))?;
        state.recorded.insert(key, response.clone());
        Ok((response.message, response.usage))
    }
}

// ---------------------------------------------------------------------------
// HTTP backend

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    tool_calls: Option<Vec<WireToolCall>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tool_call_id: Option<&'a str>,
}

#[derive(Serialize, Deserialize)]
struct WireToolCall {
    id: String,
    #[serde(rename = "type", default = "function_type")]
    kind: String,
    function: WireFunction,
}

fn function_type() -> String {
    "function".to_string()
}

#[derive(Serialize, Deserialize)]
struct WireFunction {
    name: String,
    /// JSON-encoded arguments, per the chat-completions convention.
    arguments: String,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireResponseMessage,
}

#[derive(Deserialize)]
struct WireResponseMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    tool_calls: Option<Vec<WireToolCall>>,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// HTTP backend speaking a chat-completions-style JSON protocol.
pub struct HttpBackend {
    config: BackendConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env).ok();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(600))
            .build()
            .map_err(|e| Error::Backend(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            client,
        })
    }

    fn attempt(
        &self,
        messages: &[ChatMessage],
        tools: &[ToolSpec],
    ) -> std::result::Result<(ChatMessage, Usage), (Error, bool)> {
        let wire_messages: Vec<WireMessage> = messages
            .iter()
            .map(|m| WireMessage {
                role: m.role.as_str(),
                content: &m.content,
                tool_calls: if m.tool_calls.is_empty() {
                    None
                } else {
                    Some(
                        m.tool_calls
                            .iter()
                            .map(|c| WireToolCall {
                                id: c.id.clone(),
                                kind: function_type(),
                                function: WireFunction {
                                    name: c.name.clone(),
                                    arguments: c.arguments.to_string(),
                                },
                            })
                            .collect(),
                    )
                },
                tool_call_id: m.tool_call_id.as_deref(),
            })
            .collect();

        let mut body = serde_json::json!({
            "model": self.config.model,
            "messages": wire_messages,
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
            "top_k": self.config.top_k,
            "max_tokens": self.config.max_tokens,
        });
        if !tools.is_empty() {
            body["tools"] = serde_json::json!(tools
                .iter()
                .map(|t| serde_json::json!({
                    "type": "function",
                    "function": {
                        "name": t.name,
                        "description": t.description,
                        "parameters": t.parameters,
                    }
                }))
                .collect::<Vec<_>>());
        }

        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| (Error::Backend(format!("transport: {e}")), true))?;
        let status = resp.status();
        if !status.is_success() {
            let retriable = status.as_u16() == 429 || status.is_server_error();
            let text = resp.text().unwrap_or_default();
            return Err((
                Error::Backend(format!("status {status}: {text}")),
                retriable,
            ));
        }
        let parsed: WireResponse = resp
            .json()
            .map_err(|e| (Error::Backend(format!("malformed response: {e}")), false))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or((Error::Backend("response has no choices".into()), false))?;
        let tool_calls = choice
            .message
            .tool_calls
            .unwrap_or_default()
            .into_iter()
            .map(|c| {
                let arguments = serde_json::from_str(&c.function.arguments)
                    .unwrap_or(serde_json::Value::String(c.function.arguments));
                ToolCall {
                    id: c.id,
                    name: c.function.name,
                    arguments,
                }
            })
            .collect();
        let usage = parsed.usage.unwrap_or_default();
        Ok((
            ChatMessage {
                role: Role::Assistant,
                content: choice.message.content.unwrap_or_default(),
                tool_calls,
                tool_call_id: None,
            },
            Usage::new(usage.prompt_tokens, usage.completion_tokens),
        ))
    }
}

impl Backend for HttpBackend {
    fn complete(
        &self,
        messages: &[ChatMessage],
        tools: &[ToolSpec],
    ) -> Result<(ChatMessage, Usage)> {
        if messages.is_empty() {
            return Err(Error::InvalidArgument("messages must be non-empty".into()));
        }
        let mut delay = Duration::from_millis(200);
        let mut last = None;
        for _ in 0..self.config.max_retries.max(1) {
            match self.attempt(messages, tools) {
                Ok(out) => return Ok(out),
                Err((err, retriable)) => {
                    if !retriable {
                        return Err(err);
                    }
                    last = Some(err);
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
        Err(last.unwrap_or_else(|| Error::Backend("retries exhausted".into())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_totals() {
        assert_eq!(usage_total(&[]), Usage::default());
        assert_eq!(
            usage_total(&[Usage::new(10, 5), Usage::new(3, 2)]),
            Usage::new(13, 7)
        );
    }

    #[test]
    fn config_defaults_match_settings_table() {
        let c = BackendConfig::default();
        assert_eq!(c.temperature, 1.0);
        assert_eq!(c.top_p, 0.95);
        assert_eq!(c.top_k, 40);
        assert_eq!(c.max_tokens, 16384);
        c.validate().unwrap();
    }

    #[test]
    fn request_key_ignores_whitespace_reflow() {
        let a = vec![ChatMessage::user("select  the\n tables")];
        let b = vec![ChatMessage::user("select the tables")];
        assert_eq!(request_key(&a, &[]), request_key(&b, &[]));
        let c = vec![ChatMessage::user("select other tables")];
        assert_ne!(request_key(&a, &[]), request_key(&c, &[]));
    }

    #[test]
    fn scripted_backend_replays_and_misses() {
        let messages = vec![ChatMessage::user("hello")];
        let key = request_key(&messages, &[]);
        let mut backend = ScriptedBackend::default();
        backend.insert(
            key,
            ScriptedResponse {
                message: ChatMessage::assistant("hi"),
                usage: Usage::new(7, 3),
            },
        );
        let (msg, usage) = backend.complete(&messages, &[]).unwrap();
        assert_eq!(msg.content, "hi");
        assert_eq!(usage, Usage::new(7, 3));

        let miss = backend.complete(&[ChatMessage::user("other")], &[]);
        match miss {
            Err(Error::FixtureMiss(k)) => assert_eq!(k.len(), 32),
            other => panic!("expected fixture miss, got {other:?}"),
        }
    }

    #[test]
    fn recorder_produces_replayable_fixture() {
        let recorder = ScriptRecorder::new(vec![ScriptedResponse {
            message: ChatMessage::assistant("reply"),
            usage: Usage::new(1, 2),
        }]);
        let messages = vec![ChatMessage::user("q")];
        recorder.complete(&messages, &[]).unwrap();
        let fixture = recorder.finish();
        let backend = ScriptedBackend::new(fixture);
        let (msg, _) = backend.complete(&messages, &[]).unwrap();
        assert_eq!(msg.content, "reply");
    }
}
