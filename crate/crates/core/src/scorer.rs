//! Reward scorers: a remote HTTP endpoint and a hashed-bigram linear model.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::net::{HttpError, JsonEndpoint, RetryPolicy};
use crate::text::{fnv1a64, mix64, TokenStream};

pub const ENV_URL: &str = "THEMIS_SCORER_URL";
pub const ENV_TOKEN: &str = "THEMIS_SCORER_TOKEN";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScoreError {
    #[error("scorer endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("scorer request timed out")]
    Timeout,
    #[error("scorer returned a non-finite reward: {0}")]
    NonFiniteReward(String),
    #[error("scorer returned HTTP {code}: {body}")]
    Http { code: u16, body: String },
    #[error("undecodable scorer reply: {0}")]
    Decode(String),
    #[error("invalid score request: {0}")]
    InvalidRequest(String),
    #[error("invalid scorer configuration: {0}")]
    Config(String),
}

impl From<HttpError> for ScoreError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Unreachable(s) => ScoreError::EndpointUnreachable(s),
            HttpError::Timeout => ScoreError::Timeout,
            HttpError::Status { code, body } => ScoreError::Http { code, body },
            HttpError::Decode(s) => ScoreError::Decode(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub criteria_prompt: Option<String>,
    pub task_prompt: String,
    pub response: String,
}

impl ScoreRequest {
    pub fn new(criteria_prompt: Option<&str>, task_prompt: &str, response: &str) -> Self {
        ScoreRequest {
            criteria_prompt: criteria_prompt.map(str::to_string),
            task_prompt: task_prompt.to_string(),
            response: response.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.task_prompt.is_empty() {
            return Err(ScoreError::InvalidRequest("empty task_prompt".into()));
        }
        if self.response.is_empty() {
            return Err(ScoreError::InvalidRequest("empty response".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub reward: f64,
    pub model_id: String,
    pub latency_ms: u64,
}

pub trait Scorer: Send + Sync {
    fn model_id(&self) -> &str;
    fn score_unchecked(&self, req: &ScoreRequest) -> Result<ScoreResponse, ScoreError>;
}

/// Validate the request, score it, and reject non-finite rewards.
pub fn score(req: &ScoreRequest, scorer: &dyn Scorer) -> Result<ScoreResponse, ScoreError> {
    req.validate()?;
    let resp = scorer.score_unchecked(req)?;
    if !resp.reward.is_finite() {
        return Err(ScoreError::NonFiniteReward(resp.reward.to_string()));
    }
    Ok(resp)
}

/// Score every request with at most `max_in_flight` concurrent calls.
/// `result[i]` always belongs to `reqs[i]`; failures stay in their slot.
pub fn score_batch(
    reqs: &[ScoreRequest],
    scorer: &dyn Scorer,
    max_in_flight: usize,
) -> Result<Vec<Result<ScoreResponse, ScoreError>>, ScoreError> {
    if max_in_flight == 0 {
        return Err(ScoreError::Config("max_in_flight must be at least 1".into()));
    }
    let slots: Mutex<Vec<Option<Result<ScoreResponse, ScoreError>>>> = Mutex::new(vec![None; reqs.len()]);
    let next = AtomicUsize::new(0);
    let workers = max_in_flight.min(reqs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= reqs.len() {
                    break;
                }
                let r = score(&reqs[i], scorer);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    Ok(slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every index scored"))
        .collect())
}

/// Client for `POST /v1/reward`.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    endpoint: JsonEndpoint,
    model_id: String,
}

impl RemoteScorer {
    pub fn new(base_url: &str, token: Option<String>, policy: RetryPolicy) -> Result<Self, ScoreError> {
        let endpoint = JsonEndpoint::new(base_url, token, policy)?;
        Ok(RemoteScorer { endpoint, model_id: format!("remote:{base_url}") })
    }

    /// Endpoint from `THEMIS_SCORER_URL`, token from `THEMIS_SCORER_TOKEN`.
    pub fn from_env(policy: RetryPolicy) -> Result<Self, ScoreError> {
        let url = std::env::var(ENV_URL).map_err(|_| ScoreError::Config(format!("{ENV_URL} is not set")))?;
        RemoteScorer::new(&url, std::env::var(ENV_TOKEN).ok(), policy)
    }
}

fn parse_reward(v: &Value) -> Result<f64, ScoreError> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| ScoreError::Decode(format!("reward {n}"))),
        Value::String(s) => match s.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => Err(ScoreError::Decode(format!("reward given as string {s:?}"))),
            Ok(_) => Err(ScoreError::NonFiniteReward(s.clone())),
            Err(_) => Err(ScoreError::Decode(format!("reward {s:?}"))),
        },
        Value::Null => Err(ScoreError::NonFiniteReward("null".into())),
        other => Err(ScoreError::Decode(format!("reward {other}"))),
    }
}

impl Scorer for RemoteScorer {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn score_unchecked(&self, req: &ScoreRequest) -> Result<ScoreResponse, ScoreError> {
        let body = json!({
            "system": req.criteria_prompt,
            "prompt": req.task_prompt,
            "response": req.response,
        });
        let start = Instant::now();
        let reply = self.endpoint.post("/v1/reward", &body)?;
        let latency_ms = start.elapsed().as_millis() as u64;
        let reward = parse_reward(reply.get("reward").ok_or_else(|| ScoreError::Decode("missing reward".into()))?)?;
        let model_id = reply
            .get("model_id")
            .and_then(Value::as_str)
            .unwrap_or(&self.model_id)
            .to_string();
        Ok(ScoreResponse { reward, model_id, latency_ms })
    }
}

/// Hash width of the toy feature space.
pub const FEATURE_BITS: u32 = 16;
pub const FEATURE_DIM: usize = 1 << FEATURE_BITS;
/// Identifies the feature extractor in saved weights.
pub const FEATURE_SPACE: &str = "bigram-fnv1a-2^16/1";

const MARK_P: &str = "\u{1}p";
const MARK_X: &str = "\u{1}x";
const MARK_Y: &str = "\u{1}y";

/// Sparse feature vector: sorted, unique indices. Index [`FEATURE_DIM`] is
/// the bias.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Features(pub Vec<(usize, f64)>);

impl Features {
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.0.iter().map(|(i, v)| w[*i] * v).sum()
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.0
            .binary_search_by_key(&idx, |(i, _)| *i)
            .map_or(0.0, |k| self.0[k].1)
    }
}

fn bigram_index(a: &str, b: &str) -> usize {
    let mut bytes = Vec::with_capacity(a.len() + b.len() + 1);
    bytes.extend_from_slice(a.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(b.as_bytes());
    (mix64(fnv1a64(&bytes)) % FEATURE_DIM as u64) as usize
}

/// Hashed token-bigram counts over `p ⊕ x ⊕ y` with segment markers,
/// scaled by `1/sqrt(#bigrams)`, plus a unit bias.
pub fn features(criteria_prompt: Option<&str>, task_prompt: &str, response: &str) -> Features {
    let mut seq: Vec<String> = Vec::new();
    for (mark, text) in [(MARK_P, criteria_prompt.unwrap_or("")), (MARK_X, task_prompt), (MARK_Y, response)] {
        seq.push(mark.to_string());
        seq.extend(TokenStream::normalize(text).tokens().iter().cloned());
    }
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    let n = seq.len() - 1;
    for w in seq.windows(2) {
        *counts.entry(bigram_index(&w[0], &w[1])).or_insert(0.0) += 1.0;
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut out: Vec<(usize, f64)> = counts.into_iter().map(|(i, c)| (i, c * scale)).collect();
    out.push((FEATURE_DIM, 1.0));
    Features(out)
}

pub fn request_features(req: &ScoreRequest) -> Features {
    features(req.criteria_prompt.as_deref(), &req.task_prompt, &req.response)
}

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("cannot read weights: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed weights file: {0}")]
    Format(String),
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    feature_space: String,
    dim: usize,
    bias: f64,
    /// Non-zero `[index, weight]` entries.
    weights: Vec<(usize, f64)>,
    #[serde(default)]
    meta: Value,
}

/// Linear reward over [`features`]. `weights.len() == FEATURE_DIM + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyRewardModel {
    pub weights: Vec<f64>,
    pub model_id: String,
}

impl Default for ToyRewardModel {
    fn default() -> Self {
        ToyRewardModel::zeros()
    }
}

impl ToyRewardModel {
    pub fn zeros() -> Self {
        ToyRewardModel { weights: vec![0.0; FEATURE_DIM + 1], model_id: "toy-rm".into() }
    }

    pub fn bias_only(b: f64) -> Self {
        let mut m = ToyRewardModel::zeros();
        m.weights[FEATURE_DIM] = b;
        m
    }

    pub fn reward_features(&self, f: &Features) -> f64 {
        f.dot(&self.weights)
    }

    pub fn reward(&self, req: &ScoreRequest) -> f64 {
        self.reward_features(&request_features(req))
    }

    /// JSON weights file with arbitrary run metadata.
    pub fn to_json(&self, meta: Value) -> String {
        let file = WeightsFile {
            feature_space: FEATURE_SPACE.into(),
            dim: FEATURE_DIM,
            bias: self.weights[FEATURE_DIM],
            weights: self.weights[..FEATURE_DIM]
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i, *w))
                .collect(),
            meta,
        };
        serde_json::to_string_pretty(&file).expect("weights serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, WeightsError> {
        let file: WeightsFile = serde_json::from_str(text).map_err(|e| WeightsError::Format(e.to_string()))?;
        if file.feature_space != FEATURE_SPACE || file.dim != FEATURE_DIM {
            return Err(WeightsError::Format(format!(
                "feature space {} (dim {}) does not match {FEATURE_SPACE}",
                file.feature_space, file.dim
            )));
        }
        let mut m = ToyRewardModel::zeros();
        for (i, w) in file.weights {
            if i >= FEATURE_DIM {
                return Err(WeightsError::Format(format!("index {i} out of range")));
            }
            m.weights[i] = w;
        }
        m.weights[FEATURE_DIM] = file.bias;
        Ok(m)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, WeightsError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Scorer for ToyRewardModel {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn score_unchecked(&self, req: &ScoreRequest) -> Result<ScoreResponse, ScoreError> {
        Ok(ScoreResponse { reward: self.reward(req), model_id: self.model_id.clone(), latency_ms: 0 })
    }
}
