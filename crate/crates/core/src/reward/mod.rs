//! Rewards: format gate, alignment rewards, semantic score and their
//! combination, plus the end-to-end scoring pipeline.

mod combine;
mod components;
mod format;
mod pipeline;
mod scorer;

use thiserror::Error;

use crate::metrics::MetricError;

pub use combine::{combine, round_comet, ComponentValues, Diagnostics, RewardBreakdown, RewardWeights};
pub use components::{
    key_word_order, order_pairs, reward_aao, reward_aaw, reward_bleu, reward_taw, OrderOutcome, WordOutcome,
};
pub use format::{parse_output, FormatMode, ParsedOutput};
pub use pipeline::{
    summarize, BatchSummary, Engine, EngineError, RecordError, ScoreLine, ScoreOverrides, ScoreSettings, ScoringRecord,
};
pub use scorer::{
    check_response, ConstantScorer, ScoreItem, ScoreRequest, ScoreResponse, ScorerError, ScorerHealth, SemanticScorer,
    SCORER_HEALTH_PATH, SEMANTIC_SCORE_PATH,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("source sentence is empty")]
    EmptySource,
    #[error("prediction has no tokens but {links} key links")]
    InconsistentPrediction { links: usize },
    #[error("weight {name} must be finite and >= 0, got {value}")]
    BadWeight { name: &'static str, value: f64 },
    #[error("component {name} is not finite ({value})")]
    NonFiniteComponent { name: &'static str, value: f64 },
    #[error(transparent)]
    Bleu(#[from] MetricError),
}
