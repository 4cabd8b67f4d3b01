//! Semantic-score providers and the scorer wire protocol.
//!
//! Scorers return raw scores; rounding happens in [`super::combine`].
//!
//! Wire protocol: `POST /v1/semantic-score` with a [`ScoreRequest`] body
//! answered by a [`ScoreResponse`]; `GET /v1/health` answers a
//! [`ScorerHealth`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SEMANTIC_SCORE_PATH: &str = "/v1/semantic-score";
pub const SCORER_HEALTH_PATH: &str = "/v1/health";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreItem {
    pub src: String,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub hyp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub model: String,
    pub items: Vec<ScoreItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub model: String,
    pub scores: Vec<f64>,
    #[serde(default)]
    pub latency_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerHealth {
    pub status: String,
    pub model: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("semantic scorer unavailable: {0}")]
    Unavailable(String),
    #[error("semantic scorer timed out after {ms} ms")]
    Timeout { ms: u64 },
    #[error("semantic scorer protocol error: {0}")]
    Protocol(String),
}

pub trait SemanticScorer: Send + Sync {
    fn model(&self) -> &str;

    /// One raw score per item, in order.
    fn score(&self, items: &[ScoreItem]) -> Result<Vec<f64>, ScorerError>;

    fn health(&self) -> Result<(), ScorerError> {
        Ok(())
    }
}

/// Returns the same score for every item (`mock:<constant>` binding).
#[derive(Debug, Clone)]
pub struct ConstantScorer {
    value: f64,
    model: String,
}

impl ConstantScorer {
    pub fn new(value: f64) -> Self {
        Self {
            value,
            model: format!("mock:{value}"),
        }
    }
}

impl SemanticScorer for ConstantScorer {
    fn model(&self) -> &str {
        &self.model
    }

    fn score(&self, items: &[ScoreItem]) -> Result<Vec<f64>, ScorerError> {
        Ok(vec![self.value; items.len()])
    }
}

/// Checks length and range of a scorer response against its request.
pub fn check_response(request_len: usize, response: &ScoreResponse) -> Result<(), ScorerError> {
    if response.scores.len() != request_len {
        return Err(ScorerError::Protocol(format!(
            "{} scores for {} items",
            response.scores.len(),
            request_len
        )));
    }
    if let Some(bad) = response.scores.iter().find(|s| !s.is_finite()) {
        return Err(ScorerError::Protocol(format!("non-finite score {bad}")));
    }
    Ok(())
}
