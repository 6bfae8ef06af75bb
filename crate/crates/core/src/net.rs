//! Blocking JSON-over-HTTP with bounded retries.
//!
//! 429 and 5xx responses and transport failures are retried with exponential
//! backoff plus jitter; any other 4xx is returned immediately.

use std::thread;
use std::time::Duration;

use rand::Rng;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HttpError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("undecodable reply: {0}")]
    Decode(String),
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(8),
            timeout: Duration::from_secs(120),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): full jitter over an
    /// exponentially growing cap.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let exp = self.base_delay.saturating_mul(1u32 << attempt.saturating_sub(1).min(16));
        let cap = exp.min(self.max_delay);
        let cap_ms = cap.as_millis() as u64;
        if cap_ms == 0 {
            return Duration::ZERO;
        }
        Duration::from_millis(rand::rng().random_range(cap_ms / 2..=cap_ms))
    }
}

pub fn is_retryable_status(code: u16) -> bool {
    code == 429 || (500..600).contains(&code)
}

#[derive(Debug, Clone)]
pub struct JsonEndpoint {
    client: reqwest::blocking::Client,
    base_url: String,
    token: Option<String>,
    policy: RetryPolicy,
}

impl JsonEndpoint {
    pub fn new(base_url: &str, token: Option<String>, policy: RetryPolicy) -> Result<Self, HttpError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(policy.timeout)
            .build()
            .map_err(|e| HttpError::Unreachable(e.to_string()))?;
        Ok(JsonEndpoint {
            client,
            base_url: base_url.trim_end_matches('/').to_string(),
            token,
            policy,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<Value, HttpError> {
        let mut req = self.client.post(url).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                HttpError::Timeout
            } else {
                HttpError::Unreachable(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                HttpError::Timeout
            } else {
                HttpError::Unreachable(e.to_string())
            }
        })?;
        if !(200..300).contains(&status) {
            return Err(HttpError::Status { code: status, body: text });
        }
        serde_json::from_str(&text).map_err(|e| HttpError::Decode(e.to_string()))
    }

    /// POST `body` to `path` and decode the JSON reply.
    pub fn post(&self, path: &str, body: &Value) -> Result<Value, HttpError> {
        let url = format!("{}{}", self.base_url, path);
        let mut attempt = 1;
        loop {
            let err = match self.attempt(&url, body) {
                Ok(v) => return Ok(v),
                Err(e) => e,
            };
            let retryable = match &err {
                HttpError::Status { code, .. } => is_retryable_status(*code),
                HttpError::Unreachable(_) | HttpError::Timeout => true,
                HttpError::Decode(_) => false,
            };
            if !retryable || attempt >= self.policy.max_attempts {
                return Err(err);
            }
            log::debug!("retrying {url} after attempt {attempt}: {err}");
            thread::sleep(self.policy.backoff(attempt));
            attempt += 1;
        }
    }
}
