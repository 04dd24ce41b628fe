//! HTTP client side of the inference wire protocol.
//!
//! `POST /infer` with an [`InferRequest`] body answers with an
//! [`InferResponse`] whose `outputs` align index by index with the request
//! sentences. A `null` output marks a failure on that sentence only; an
//! `error` object marks a failure of the whole request.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::backend::{Backend, BackendDescriptor, ItemOutput, TaskKind, Transport};
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: &str = "pdd-infer/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferRequest {
    pub protocol: String,
    pub task: TaskKind,
    pub label_map_id: String,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InferResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<Option<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ProtocolError>,
}

impl InferResponse {
    pub fn ok(outputs: Vec<Option<String>>) -> Self {
        InferResponse { protocol: Some(PROTOCOL_VERSION.into()), outputs: Some(outputs), error: None }
    }

    pub fn error(code: impl Into<String>, message: impl Into<String>) -> Self {
        InferResponse {
            protocol: Some(PROTOCOL_VERSION.into()),
            outputs: None,
            error: Some(ProtocolError { code: code.into(), message: message.into() }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WireConfig {
    /// Base URL of the server; `/infer` is appended.
    pub url: String,
    pub timeout: Duration,
    /// Extra attempts per batch after a timeout, connection failure or 5xx.
    pub retries: u32,
    pub batch_size: usize,
}

impl WireConfig {
    pub fn new(url: impl Into<String>) -> Self {
        WireConfig { url: url.into(), timeout: Duration::from_secs(30), retries: 1, batch_size: 32 }
    }
}

pub struct WireBackend {
    desc: BackendDescriptor,
    config: WireConfig,
    agent: ureq::Agent,
    attempts: AtomicUsize,
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

impl WireBackend {
    pub fn new(id: impl Into<String>, kind: TaskKind, label_map_id: impl Into<String>, config: WireConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        WireBackend {
            desc: BackendDescriptor {
                id: id.into(),
                kind,
                transport: Transport::Wire,
                label_map_id: label_map_id.into(),
            },
            config,
            agent,
            attempts: AtomicUsize::new(0),
        }
    }

    /// HTTP requests issued so far, retries included.
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    fn endpoint(&self) -> String {
        format!("{}/infer", self.config.url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &str, n: usize) -> std::result::Result<Vec<ItemOutput>, Failure> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        let mut resp = self
            .agent
            .post(&self.endpoint())
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        if status >= 500 {
            return Err(Failure::Retryable(format!("HTTP {status}: {text}")));
        }
        let parsed: InferResponse = serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(format!("HTTP {status}: malformed response: {e}")))?;
        if let Some(err) = parsed.error {
            return Err(Failure::Fatal(format!("HTTP {status}: {}: {}", err.code, err.message)));
        }
        if status >= 400 {
            return Err(Failure::Fatal(format!("HTTP {status}")));
        }
        let outputs = parsed
            .outputs
            .ok_or_else(|| Failure::Fatal("response carries no outputs".into()))?;
        if outputs.len() != n {
            return Err(Failure::Fatal(format!("response has {} outputs for {n} sentences", outputs.len())));
        }
        Ok(outputs
            .into_iter()
            .map(|o| o.ok_or_else(|| "backend returned null for this sentence".to_string()))
            .collect())
    }

    fn send_batch(&self, batch: &[String]) -> Result<Vec<ItemOutput>> {
        let req = InferRequest {
            protocol: PROTOCOL_VERSION.into(),
            task: self.desc.kind,
            label_map_id: self.desc.label_map_id.clone(),
            sentences: batch.to_vec(),
        };
        let body = serde_json::to_string(&req)?;
        let mut last = String::new();
        for _ in 0..=self.config.retries {
            match self.attempt(&body, batch.len()) {
                Ok(out) => return Ok(out),
                Err(Failure::Fatal(msg)) => return Err(Error::Transport(msg)),
                Err(Failure::Retryable(msg)) => {
                    log::warn!("{}: {msg}", self.endpoint());
                    last = msg;
                }
            }
        }
        Err(Error::Transport(format!(
            "{} failed after {} attempts: {last}",
            self.endpoint(),
            self.config.retries + 1
        )))
    }
}

impl Backend for WireBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.desc
    }

    fn infer(&self, sentences: &[String]) -> Result<Vec<ItemOutput>> {
        let mut out = Vec::with_capacity(sentences.len());
        for batch in sentences.chunks(self.config.batch_size.max(1)) {
            out.extend(self.send_batch(batch)?);
        }
        Ok(out)
    }
}
