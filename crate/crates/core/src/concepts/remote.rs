//! Client for an external NER service.
//!
//! `POST {endpoint}/extract` with `{"text": ..., "section": ...}`; the
//! service answers `{"spans": [{"text", "type", "start", "end"}]}` with byte
//! offsets into `text`. Every span is checked before it is accepted.

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ConceptSpan, ConceptType};
use crate::http::{join_url, HttpError, JsonClient, RetryPolicy};
use crate::section::SectionName;

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Serialize, Deserialize)]
pub struct NerRequest {
    pub text: String,
    pub section: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireSpan {
    pub text: String,
    #[serde(rename = "type")]
    pub ctype: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NerResponse {
    pub spans: Vec<WireSpan>,
}

#[derive(Debug, Error)]
pub enum NerError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("span {index} ({text:?}): {reason}")]
    Protocol {
        index: usize,
        text: String,
        reason: String,
    },
}

#[derive(Debug, Clone)]
pub struct RemoteNer {
    client: JsonClient,
    url: String,
}

impl RemoteNer {
    pub fn new(endpoint: &str, policy: RetryPolicy) -> Self {
        RemoteNer {
            client: JsonClient::new(policy),
            url: join_url(endpoint, "extract"),
        }
    }

    pub async fn extract(
        &self,
        text: &str,
        section: &SectionName,
    ) -> Result<Vec<ConceptSpan>, NerError> {
        let request = NerRequest {
            text: text.to_string(),
            section: section.display_name().to_string(),
        };
        let response = self
            .client
            .post::<_, NerResponse>(&self.url, &request)
            .await?;
        validate_spans(text, section, response.value.spans)
    }

    /// Extracts each document independently with at most `max_in_flight`
    /// concurrent requests. Results keep input order; one failure does not
    /// affect the others.
    pub async fn extract_many(
        &self,
        docs: &[(String, SectionName)],
        max_in_flight: usize,
    ) -> Vec<Result<Vec<ConceptSpan>, NerError>> {
        stream::iter(docs)
            .map(|(text, section)| self.extract(text, section))
            .buffered(max_in_flight.max(1))
            .collect()
            .await
    }
}

/// Checks offsets, types and surface text, and that spans are sorted and
/// non-overlapping.
pub fn validate_spans(
    text: &str,
    section: &SectionName,
    spans: Vec<WireSpan>,
) -> Result<Vec<ConceptSpan>, NerError> {
    let mut out: Vec<ConceptSpan> = Vec::with_capacity(spans.len());
    for (index, span) in spans.into_iter().enumerate() {
        let fail = |reason: String| NerError::Protocol {
            index,
            text: span.text.clone(),
            reason,
        };
        let ctype: ConceptType = span.ctype.parse().map_err(&fail)?;
        if span.start >= span.end || span.end > text.len() {
            return Err(fail(format!(
                "offsets {}..{} out of bounds for text of {} bytes",
                span.start,
                span.end,
                text.len()
            )));
        }
        let Some(slice) = text.get(span.start..span.end) else {
            return Err(fail("offsets are not on character boundaries".into()));
        };
        if slice != span.text {
            return Err(fail(format!("text does not match source slice {slice:?}")));
        }
        if let Some(prev) = out.last() {
            if span.start < prev.end {
                return Err(fail("span overlaps or precedes the previous span".into()));
            }
        }
        out.push(ConceptSpan {
            text: span.text,
            ctype,
            start: span.start,
            end: span.end,
            section: section.clone(),
        });
    }
    Ok(out)
}

impl From<&ConceptSpan> for WireSpan {
    fn from(span: &ConceptSpan) -> Self {
        WireSpan {
            text: span.text.clone(),
            ctype: span.ctype.as_str().to_string(),
            start: span.start,
            end: span.end,
        }
    }
}
