//! Client for an external scorer.
//!
//! `POST {base}/score` with `{"candidate", "reference", "metric"}`; the
//! server answers `{"value"}`. Values outside [0, 1] are clamped.

use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};

use super::{MetricId, Sample};
use crate::http::{join_url, HttpError, JsonClient, RetryPolicy};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub candidate: String,
    pub reference: String,
    pub metric: MetricId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub value: f64,
    /// The raw value when it had to be clamped.
    pub clamped_from: Option<f64>,
}

impl Scored {
    pub fn clamp(raw: f64) -> Result<Self, HttpError> {
        if raw.is_nan() {
            return Err(HttpError::Protocol {
                message: "scorer returned NaN".to_string(),
                retries: 0,
            });
        }
        let value = raw.clamp(0.0, 1.0);
        Ok(Scored {
            value,
            clamped_from: (value != raw).then_some(raw),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RemoteScorer {
    client: JsonClient,
    url: String,
}

impl RemoteScorer {
    pub fn new(endpoint: &str, policy: RetryPolicy) -> Self {
        RemoteScorer {
            client: JsonClient::new(policy),
            url: join_url(endpoint, "score"),
        }
    }

    pub async fn score(
        &self,
        candidate: &str,
        reference: &str,
        metric: MetricId,
    ) -> Result<Scored, HttpError> {
        let body = ScoreRequest {
            candidate: candidate.to_string(),
            reference: reference.to_string(),
            metric,
        };
        let response = self
            .client
            .post::<_, ScoreResponse>(&self.url, &body)
            .await?;
        Scored::clamp(response.value.value)
    }

    /// Scores every sample; the first failure fails the whole metric.
    pub async fn score_many(
        &self,
        samples: &[Sample],
        metric: MetricId,
        max_in_flight: usize,
    ) -> Result<Vec<Scored>, HttpError> {
        stream::iter(samples)
            .map(|s| self.score(&s.candidate, &s.reference, metric))
            .buffered(max_in_flight.max(1))
            .try_collect()
            .await
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamping() {
        assert_eq!(
            Scored::clamp(0.8).unwrap(),
            Scored {
                value: 0.8,
                clamped_from: None
            }
        );
        assert_eq!(
            Scored::clamp(1.3).unwrap(),
            Scored {
                value: 1.0,
                clamped_from: Some(1.3)
            }
        );
        assert_eq!(Scored::clamp(-0.1).unwrap().value, 0.0);
        assert!(Scored::clamp(f64::NAN).is_err());
    }
}
