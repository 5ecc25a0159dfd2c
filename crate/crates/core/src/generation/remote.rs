//! Client for an HTTP generator.
//!
//! `POST {base}/generate` with
//! `{"prompt", "temperature", "top_p", "max_new_tokens", "seed"}`; the server
//! answers `{"text"}`. A status of 413 means the prompt does not fit the
//! model's context window.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{Generated, GenerationError, GenerationRequest, Generator};
use crate::http::{join_url, JsonClient, RetryPolicy};
use crate::section::TargetSection;
use crate::segmenter::segment;
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireGenerateRequest {
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireGenerateResponse {
    pub text: String,
}

/// Cleans raw generator output: drops a leading copy of the prompt and of
/// the target's own header, cuts at the next canonical section header, trims,
/// and caps the length at `max_new_tokens`.
pub fn postprocess(
    raw: &str,
    prompt: &str,
    target: TargetSection,
    max_new_tokens: usize,
    tokenizer: Tokenizer,
) -> String {
    let mut text = raw.strip_prefix(prompt).unwrap_or(raw).trim_start();

    let note = segment(text);
    if let Some(first) = note.sections.first() {
        if first.header_span.start == 0 && first.name == target.section_name() {
            text = &text[first.header_span.end..];
        }
    }
    let note = segment(text);
    if let Some(next) = note.sections.iter().find(|s| s.name.is_canonical()) {
        text = &text[..next.header_span.start];
    }
    tokenizer
        .truncate(text.trim(), max_new_tokens)
        .trim()
        .to_string()
}

#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    client: JsonClient,
    url: String,
    tokenizer: Tokenizer,
}

impl RemoteGenerator {
    pub fn new(endpoint: &str, policy: RetryPolicy, tokenizer: Tokenizer) -> Self {
        RemoteGenerator {
            client: JsonClient::new(policy),
            url: join_url(endpoint, "generate"),
            tokenizer,
        }
    }
}

#[async_trait]
impl Generator for RemoteGenerator {
    fn backend_id(&self) -> &str {
        "remote"
    }

    async fn generate(&self, req: &GenerationRequest) -> Result<Generated, GenerationError> {
        if req.prompt.is_empty() {
            return Err(GenerationError::Config("empty prompt".to_string()));
        }
        let body = WireGenerateRequest {
            prompt: req.prompt.clone(),
            temperature: req.params.temperature,
            top_p: req.params.top_p,
            max_new_tokens: req.params.max_new_tokens,
            seed: req.params.seed,
        };
        let response = self
            .client
            .post::<_, WireGenerateResponse>(&self.url, &body)
            .await?;
        Ok(Generated {
            text: postprocess(
                &response.value.text,
                &req.prompt,
                req.target,
                req.params.max_new_tokens,
                self.tokenizer,
            ),
            retries: response.retries,
        })
    }
}
