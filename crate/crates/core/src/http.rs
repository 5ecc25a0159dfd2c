//! JSON-over-HTTP client shared by the remote NER, generator and scorer
//! backends: bounded retries with exponential backoff on transport failures,
//! timeouts and 5xx/429 responses.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub timeout_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 2,
            initial_backoff_ms: 250,
            max_backoff_ms: 5_000,
            timeout_ms: 120_000,
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, retry: u32) -> Duration {
        let ms = self
            .initial_backoff_ms
            .saturating_mul(1u64 << retry.min(20))
            .min(self.max_backoff_ms);
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("invalid endpoint `{0}`")]
    InvalidEndpoint(String),
    #[error("request failed after {} attempt(s): {message}", retries + 1)]
    Exhausted { retries: u32, message: String },
    #[error("server returned status {status}: {body}")]
    Status {
        status: u16,
        body: String,
        retries: u32,
    },
    #[error("malformed response: {message}")]
    Protocol { message: String, retries: u32 },
}

impl HttpError {
    pub fn retries(&self) -> u32 {
        match self {
            HttpError::InvalidEndpoint(_) => 0,
            HttpError::Exhausted { retries, .. }
            | HttpError::Status { retries, .. }
            | HttpError::Protocol { retries, .. } => *retries,
        }
    }
}

/// A decoded response plus the number of retries it took.
#[derive(Debug, Clone)]
pub struct Retried<T> {
    pub value: T,
    pub retries: u32,
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    client: reqwest::Client,
    policy: RetryPolicy,
}

/// Joins a base address and a route, tolerating trailing slashes.
pub fn join_url(base: &str, route: &str) -> String {
    format!(
        "{}/{}",
        base.trim_end_matches('/'),
        route.trim_start_matches('/')
    )
}

impl JsonClient {
    pub fn new(policy: RetryPolicy) -> Self {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(policy.timeout_ms))
            .build()
            .expect("reqwest client without TLS configuration always builds");
        JsonClient { client, policy }
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    pub async fn post<Req, Resp>(&self, url: &str, body: &Req) -> Result<Retried<Resp>, HttpError>
    where
        Req: Serialize + ?Sized,
        Resp: DeserializeOwned,
    {
        let parsed =
            reqwest::Url::parse(url).map_err(|_| HttpError::InvalidEndpoint(url.to_string()))?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(HttpError::InvalidEndpoint(url.to_string()));
        }

        let mut retries = 0;
        loop {
            let outcome = self.attempt(parsed.clone(), body).await;
            let retryable_message = match outcome {
                Ok(bytes) => {
                    return serde_json::from_slice(&bytes)
                        .map(|value| Retried { value, retries })
                        .map_err(|e| HttpError::Protocol {
                            message: e.to_string(),
                            retries,
                        });
                }
                Err(Attempt::Fatal { status, body }) => {
                    return Err(HttpError::Status {
                        status,
                        body,
                        retries,
                    })
                }
                Err(Attempt::Retryable(message)) => message,
            };
            if retries >= self.policy.max_retries {
                warn!(url, retries, "giving up: {retryable_message}");
                return Err(HttpError::Exhausted {
                    retries,
                    message: retryable_message,
                });
            }
            let delay = self.policy.backoff(retries);
            debug!(
                url,
                retry = retries + 1,
                ?delay,
                "retrying after: {retryable_message}"
            );
            tokio::time::sleep(delay).await;
            retries += 1;
        }
    }

    async fn attempt<Req: Serialize + ?Sized>(
        &self,
        url: reqwest::Url,
        body: &Req,
    ) -> Result<Vec<u8>, Attempt> {
        let response = self
            .client
            .post(url)
            .json(body)
            .send()
            .await
            .map_err(|e| Attempt::Retryable(e.to_string()))?;
        let status = response.status();
        let bytes = response
            .bytes()
            .await
            .map_err(|e| Attempt::Retryable(e.to_string()))?;
        if status.is_success() {
            return Ok(bytes.to_vec());
        }
        let body = String::from_utf8_lossy(&bytes).into_owned();
        if status.is_server_error() || status.as_u16() == 429 {
            Err(Attempt::Retryable(format!("status {status}: {body}")))
        } else {
            Err(Attempt::Fatal {
                status: status.as_u16(),
                body,
            })
        }
    }
}

enum Attempt {
    Retryable(String),
    Fatal { status: u16, body: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            initial_backoff_ms: 100,
            max_backoff_ms: 350,
            ..RetryPolicy::default()
        };
        assert_eq!(p.backoff(0), Duration::from_millis(100));
        assert_eq!(p.backoff(1), Duration::from_millis(200));
        assert_eq!(p.backoff(2), Duration::from_millis(350));
        assert_eq!(p.backoff(40), Duration::from_millis(350));
    }

    #[test]
    fn url_join() {
        assert_eq!(join_url("http://h:1/", "/generate"), "http://h:1/generate");
        assert_eq!(join_url("http://h:1/api", "score"), "http://h:1/api/score");
    }

    #[tokio::test]
    async fn rejects_non_http_endpoints() {
        let client = JsonClient::new(RetryPolicy::default());
        let err = client
            .post::<_, serde_json::Value>("ftp://example/x", &serde_json::json!({}))
            .await
            .unwrap_err();
        assert!(matches!(err, HttpError::InvalidEndpoint(_)));
    }
}
