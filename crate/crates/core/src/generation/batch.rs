use std::time::Instant;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{GenerationRequest, GenerationResponse, Generator};
use crate::section::TargetSection;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum OutcomeStatus {
    Success,
    Failure { stage: String, error: String },
}

/// What happened to one `(hadm_id, target)` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentOutcome {
    pub hadm_id: String,
    pub target: TargetSection,
    #[serde(flatten)]
    pub status: OutcomeStatus,
    pub retries: u32,
    pub latency_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<GenerationResponse>,
}

impl DocumentOutcome {
    pub fn is_success(&self) -> bool {
        self.status == OutcomeStatus::Success
    }

    pub fn failure(hadm_id: &str, target: TargetSection, stage: &str, error: String) -> Self {
        DocumentOutcome {
            hadm_id: hadm_id.to_string(),
            target,
            status: OutcomeStatus::Failure {
                stage: stage.to_string(),
                error,
            },
            retries: 0,
            latency_ms: 0,
            response: None,
        }
    }

    pub fn text(&self) -> &str {
        self.response.as_ref().map_or("", |r| r.text.as_str())
    }
}

/// Runs every request with at most `max_in_flight` in progress. Outcomes are
/// sorted by `(hadm_id, target)`; failures are recorded, never propagated.
pub async fn generate_batch(
    generator: &dyn Generator,
    mut requests: Vec<GenerationRequest>,
    max_in_flight: usize,
) -> Vec<DocumentOutcome> {
    requests.sort_by(|a, b| (&a.hadm_id, a.target).cmp(&(&b.hadm_id, b.target)));
    stream::iter(requests)
        .map(|req| async move {
            let started = Instant::now();
            let result = generator.generate(&req).await;
            let latency_ms = started.elapsed().as_millis() as u64;
            match result {
                Ok(generated) => DocumentOutcome {
                    hadm_id: req.hadm_id.clone(),
                    target: req.target,
                    status: OutcomeStatus::Success,
                    retries: generated.retries,
                    latency_ms,
                    response: Some(GenerationResponse {
                        hadm_id: req.hadm_id,
                        target: req.target,
                        text: generated.text,
                        backend_id: generator.backend_id().to_string(),
                        latency_ms,
                        retries: generated.retries,
                    }),
                },
                Err(e) => {
                    warn!(hadm_id = %req.hadm_id, target = %req.target, "generation failed: {e}");
                    DocumentOutcome {
                        retries: e.retries(),
                        latency_ms,
                        ..DocumentOutcome::failure(
                            &req.hadm_id,
                            req.target,
                            "generate",
                            e.to_string(),
                        )
                    }
                }
            }
        })
        .buffered(max_in_flight.max(1))
        .collect()
        .await
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::generation::{GenerationParams, MockGenerator};

    #[tokio::test]
    async fn sorted_and_failures_recorded() {
        let g = MockGenerator::new(BTreeMap::from([(
            TargetSection::BriefHospitalCourse,
            "ok".to_string(),
        )]));
        let mk = |id: &str, target| GenerationRequest {
            hadm_id: id.into(),
            target,
            prompt: "p".into(),
            params: GenerationParams::default(),
        };
        let out = generate_batch(
            &g,
            vec![
                mk("B", TargetSection::DischargeInstructions),
                mk("B", TargetSection::BriefHospitalCourse),
                mk("A", TargetSection::BriefHospitalCourse),
            ],
            2,
        )
        .await;
        let keys: Vec<_> = out.iter().map(|o| (o.hadm_id.as_str(), o.target)).collect();
        assert_eq!(
            keys,
            [
                ("A", TargetSection::BriefHospitalCourse),
                ("B", TargetSection::BriefHospitalCourse),
                ("B", TargetSection::DischargeInstructions)
            ]
        );
        assert!(out[0].is_success() && out[1].is_success());
        assert!(!out[2].is_success());
        assert_eq!(out[2].text(), "");
    }
}
