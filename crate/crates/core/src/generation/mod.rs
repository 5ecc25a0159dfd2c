//! Generation backends behind one async interface.

mod batch;
mod extractive;
mod mock;
mod remote;
mod submission;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use batch::{generate_batch, DocumentOutcome, OutcomeStatus};
pub use extractive::{generate_extractive, split_sentences, ExtractiveGenerator};
pub use mock::MockGenerator;
pub use remote::{postprocess, RemoteGenerator, WireGenerateRequest, WireGenerateResponse};
pub use submission::{read_submission, write_submission, SubmissionError, SubmissionRow};

use crate::http::HttpError;
use crate::section::TargetSection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: usize,
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.2,
            top_p: 0.6,
            max_new_tokens: 512,
            seed: None,
        }
    }
}

impl GenerationParams {
    /// Field-level problems, as `(field, message)` pairs.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            out.push((
                "temperature",
                format!("must be > 0, got {}", self.temperature),
            ));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            out.push(("top_p", format!("must be in (0, 1], got {}", self.top_p)));
        }
        if self.max_new_tokens == 0 {
            out.push(("max_new_tokens", "must be > 0".to_string()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub hadm_id: String,
    pub target: TargetSection,
    pub prompt: String,
    pub params: GenerationParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub hadm_id: String,
    pub target: TargetSection,
    pub text: String,
    pub backend_id: String,
    pub latency_ms: u64,
    pub retries: u32,
}

/// Text produced by a backend, before the driver attaches timing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub text: String,
    pub retries: u32,
}

impl Generated {
    pub fn new(text: impl Into<String>) -> Self {
        Generated {
            text: text.into(),
            retries: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("prompt exceeds the generator's context window: {body}")]
    ContextOverflow { body: String, retries: u32 },
    #[error("malformed generator response: {message}")]
    Protocol { message: String, retries: u32 },
    #[error(transparent)]
    Http(HttpError),
}

impl GenerationError {
    pub fn retries(&self) -> u32 {
        match self {
            GenerationError::Config(_) => 0,
            GenerationError::ContextOverflow { retries, .. }
            | GenerationError::Protocol { retries, .. } => *retries,
            GenerationError::Http(e) => e.retries(),
        }
    }
}

impl From<HttpError> for GenerationError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Status {
                status: 413,
                body,
                retries,
            } => GenerationError::ContextOverflow { body, retries },
            HttpError::Protocol { message, retries } => {
                GenerationError::Protocol { message, retries }
            }
            other => GenerationError::Http(other),
        }
    }
}

#[async_trait]
pub trait Generator: Send + Sync {
    fn backend_id(&self) -> &str;

    async fn generate(&self, req: &GenerationRequest) -> Result<Generated, GenerationError>;
}
