use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{
    BackendDescriptor, BackendError, ChatBackend, ChatRequest, Health, DEFAULT_RESPONSE_POINTER,
};
use crate::sync::Semaphore;

/// Chat-completion client: POSTs `{model, messages, temperature, max_tokens}`
/// and reads the answer from a JSON pointer into the response body.
pub struct RemoteBackend {
    descriptor: BackendDescriptor,
    agent: ureq::Agent,
    in_flight: Semaphore,
}

impl RemoteBackend {
    pub fn new(descriptor: BackendDescriptor) -> Result<Self, BackendError> {
        descriptor.validate()?;
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(descriptor.timeout_ms)))
            .http_status_as_error(false)
            .build();
        Ok(Self {
            in_flight: Semaphore::new(descriptor.max_in_flight),
            agent: config.into(),
            descriptor,
        })
    }

    fn endpoint(&self) -> &str {
        self.descriptor.endpoint.as_deref().unwrap_or_default()
    }

    fn pointer(&self) -> &str {
        self.descriptor
            .response_pointer
            .as_deref()
            .unwrap_or(DEFAULT_RESPONSE_POINTER)
    }

    fn map_error(&self, err: ureq::Error) -> BackendError {
        match err {
            ureq::Error::Timeout(_) => BackendError::Timeout(self.descriptor.timeout_ms),
            ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => {
                BackendError::Timeout(self.descriptor.timeout_ms)
            }
            ureq::Error::Io(e) => BackendError::Transport(e.to_string()),
            ureq::Error::HostNotFound | ureq::Error::ConnectionFailed => {
                BackendError::Transport(err.to_string())
            }
            ureq::Error::Json(e) => BackendError::Protocol { status: None, message: e.to_string() },
            ureq::Error::StatusCode(code) => BackendError::Protocol { status: Some(code), message: String::new() },
            other => BackendError::Protocol { status: None, message: other.to_string() },
        }
    }
}

impl ChatBackend for RemoteBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        let _permit = self.in_flight.acquire();
        let body = json!({
            "model": self.descriptor.model_id,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut builder = self.agent.post(self.endpoint());
        if let Some(var) = &self.descriptor.api_key_env {
            if let Ok(key) = std::env::var(var) {
                builder = builder.header("Authorization", format!("Bearer {key}"));
            }
        }
        let mut response = builder.send_json(&body).map_err(|e| self.map_error(e))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let message = response
                .body_mut()
                .read_to_string()
                .unwrap_or_default()
                .chars()
                .take(200)
                .collect();
            return Err(BackendError::Protocol { status: Some(status), message });
        }
        let value: Value = response.body_mut().read_json().map_err(|e| self.map_error(e))?;
        value
            .pointer(self.pointer())
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Protocol {
                status: Some(status),
                message: format!("no text at {}", self.pointer()),
            })
    }

    fn health_check(&self) -> Health {
        let start = Instant::now();
        let ok = self.complete(&ChatRequest::user("ping").max_tokens(1)).is_ok();
        Health {
            healthy: ok,
            latency_ms: start.elapsed().as_secs_f64() * 1000.0,
        }
    }
}
