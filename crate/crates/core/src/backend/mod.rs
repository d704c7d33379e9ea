//! Uniform access to text-generation backends.
//!
//! Agents only ever see [`ChatBackend`]. Two implementations ship: a remote
//! chat-completion client speaking plain JSON over HTTP, and a scripted mock
//! whose answers are a pure function of the request.

mod mock;
mod remote;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{parse_script, MatchKind, MockMatcher, MockRule, ScriptedMock};
pub use remote::RemoteBackend;

pub const DEFAULT_RESPONSE_POINTER: &str = "/choices/0/message/content";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    #[serde(default)]
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// A system instruction followed by one user turn, at temperature 0.
    pub fn with_system(system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            messages: vec![
                ChatMessage { role: Role::System, content: system.into() },
                ChatMessage { role: Role::User, content: user.into() },
            ],
            temperature: 0.0,
            max_tokens: 256,
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            messages: vec![ChatMessage { role: Role::User, content: content.into() }],
            temperature: 0.0,
            max_tokens: 256,
        }
    }

    pub fn max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn last_user_message(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("at least one message required".into()));
        }
        if self.messages.iter().skip(1).any(|m| m.role == Role::System) {
            return Err(BackendError::InvalidRequest("only the first message may be a system message".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest("temperature must be non-negative".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    RemoteHttp,
    ScriptedMock,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_in_flight() -> usize {
    4
}

/// Static description of a backend, as it appears in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendDescriptor {
    /// Defaults to the key under which the descriptor is configured.
    #[serde(default)]
    pub name: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// JSON pointer to the response text (remote only).
    #[serde(default)]
    pub response_pointer: Option<String>,
    /// Environment variable holding a bearer token (remote only).
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// Mock script file: a JSON array of rules.
    #[serde(default)]
    pub script_file: Option<PathBuf>,
    /// Inline mock rules, applied after those from `script_file`.
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default_response: Option<String>,
}

impl BackendDescriptor {
    pub fn mock(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: BackendKind::ScriptedMock,
            endpoint: None,
            model_id: None,
            timeout_ms: default_timeout_ms(),
            response_pointer: None,
            api_key_env: None,
            max_in_flight: default_max_in_flight(),
            script_file: None,
            rules: Vec::new(),
            default_response: None,
        }
    }

    pub fn remote(name: impl Into<String>, endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::RemoteHttp,
            endpoint: Some(endpoint.into()),
            model_id: Some(model_id.into()),
            ..Self::mock(name)
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.timeout_ms == 0 {
            return Err(BackendError::Config(format!("{}: timeout_ms must be positive", self.name)));
        }
        if self.kind == BackendKind::RemoteHttp && (self.endpoint.is_none() || self.model_id.is_none()) {
            return Err(BackendError::Config(format!(
                "{}: remote_http backends need endpoint and model_id",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend timed out after {0} ms")]
    Timeout(u64),
    #[error("protocol error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Protocol { status: Option<u16>, message: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no scripted response matched and no default is configured")]
    NoMatch,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Network-level failures that may succeed on retry.
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Timeout(_) | BackendError::Transport(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub healthy: bool,
    pub latency_ms: f64,
}

pub trait ChatBackend: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;

    fn health_check(&self) -> Health;

    fn name(&self) -> &str {
        &self.descriptor().name
    }
}

pub type SharedBackend = Arc<dyn ChatBackend>;

/// Instantiates the backend a descriptor describes.
pub fn build_backend(descriptor: &BackendDescriptor) -> Result<SharedBackend, BackendError> {
    descriptor.validate()?;
    Ok(match descriptor.kind {
        BackendKind::ScriptedMock => Arc::new(ScriptedMock::from_descriptor(descriptor.clone())?),
        BackendKind::RemoteHttp => Arc::new(RemoteBackend::new(descriptor.clone())?),
    })
}
