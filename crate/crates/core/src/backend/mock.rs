use std::fs;

use serde::{Deserialize, Serialize};

use super::{BackendDescriptor, BackendError, ChatBackend, ChatRequest, Health};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Contains,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockMatcher {
    pub kind: MatchKind,
    pub value: String,
}

/// One entry of a mock script file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(rename = "match")]
    pub matcher: MockMatcher,
    pub response: String,
}

impl MockRule {
    pub fn contains(value: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: MockMatcher { kind: MatchKind::Contains, value: value.into() },
            response: response.into(),
        }
    }

    pub fn exact(value: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: MockMatcher { kind: MatchKind::Exact, value: value.into() },
            response: response.into(),
        }
    }

    fn fires(&self, message: &str) -> bool {
        match self.matcher.kind {
            MatchKind::Exact => message == self.matcher.value,
            MatchKind::Contains => message.contains(&self.matcher.value),
        }
    }
}

/// Deterministic backend: the first rule matching the last user message
/// wins, otherwise the default response is returned.
#[derive(Debug, Clone)]
pub struct ScriptedMock {
    descriptor: BackendDescriptor,
    rules: Vec<MockRule>,
    default: Option<String>,
}

impl ScriptedMock {
    pub fn new(name: impl Into<String>, rules: Vec<MockRule>, default: Option<String>) -> Self {
        let mut descriptor = BackendDescriptor::mock(name);
        descriptor.rules = rules.clone();
        descriptor.default_response = default.clone();
        Self { descriptor, rules, default }
    }

    /// A mock that answers every request with `response`.
    pub fn constant(name: impl Into<String>, response: impl Into<String>) -> Self {
        Self::new(name, Vec::new(), Some(response.into()))
    }

    pub fn from_descriptor(descriptor: BackendDescriptor) -> Result<Self, BackendError> {
        let mut rules = match &descriptor.script_file {
            Some(path) => {
                let raw = fs::read_to_string(path)
                    .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
                parse_script(&raw)?
            }
            None => Vec::new(),
        };
        rules.extend(descriptor.rules.iter().cloned());
        let default = descriptor.default_response.clone();
        Ok(Self { descriptor, rules, default })
    }

    pub fn rules(&self) -> &[MockRule] {
        &self.rules
    }
}

/// Parses a script file body (JSON array of rules).
pub fn parse_script(raw: &str) -> Result<Vec<MockRule>, BackendError> {
    serde_json::from_str(raw).map_err(|e| BackendError::Config(format!("mock script: {e}")))
}

impl ChatBackend for ScriptedMock {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        let message = request.last_user_message().unwrap_or("");
        self.rules
            .iter()
            .find(|r| r.fires(message))
            .map(|r| r.response.clone())
            .or_else(|| self.default.clone())
            .ok_or(BackendError::NoMatch)
    }

    fn health_check(&self) -> Health {
        Health { healthy: true, latency_ms: 0.0 }
    }
}
