//! Constant-score server speaking the semantic-scorer wire protocol.
//! Stands in for a real quality-estimation model in tests and demos.

use std::sync::Arc;

use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};
use termalign_core::reward::{ScoreRequest, ScoreResponse, ScorerHealth, SCORER_HEALTH_PATH, SEMANTIC_SCORE_PATH};

struct Mock {
    value: f64,
    model: String,
}

pub fn router(value: f64) -> Router {
    let state = Arc::new(Mock {
        value,
        model: format!("mock:{value}"),
    });
    Router::new()
        .route(SEMANTIC_SCORE_PATH, post(score))
        .route(SCORER_HEALTH_PATH, get(health))
        .with_state(state)
}

async fn score(State(mock): State<Arc<Mock>>, Json(request): Json<ScoreRequest>) -> Json<ScoreResponse> {
    let n = request.items.len();
    Json(ScoreResponse {
        model: request.model,
        scores: vec![mock.value; n],
        latency_ms: vec![0.0; n],
    })
}

async fn health(State(mock): State<Arc<Mock>>) -> Json<ScorerHealth> {
    Json(ScorerHealth {
        status: "ok".into(),
        model: mock.model.clone(),
    })
}
