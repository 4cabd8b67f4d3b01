//! Reward service: `POST /v1/score` and `GET /v1/health`.

use std::sync::{Arc, Mutex, OnceLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use termalign_core::reward::{
    summarize, BatchSummary, Engine, RecordError, RewardBreakdown, ScoreLine, ScoreOverrides, ScoringRecord,
};

pub const SCORE_PATH: &str = "/v1/score";
pub const HEALTH_PATH: &str = "/v1/health";

/// Shared service state. The engine is installed once loading finishes;
/// until then health reports `loading` and scoring answers 503.
pub struct AppState {
    engine: OnceLock<Arc<Engine>>,
    load_error: Mutex<Option<String>>,
    config_hash: String,
}

impl AppState {
    pub fn loading(config_hash: impl Into<String>) -> Arc<Self> {
        Arc::new(Self {
            engine: OnceLock::new(),
            load_error: Mutex::new(None),
            config_hash: config_hash.into(),
        })
    }

    pub fn ready(engine: Engine, config_hash: impl Into<String>) -> Arc<Self> {
        let state = Self::loading(config_hash);
        state.install(engine);
        state
    }

    pub fn install(&self, engine: Engine) {
        let _ = self.engine.set(Arc::new(engine));
    }

    pub fn fail(&self, message: String) {
        *self.load_error.lock().unwrap() = Some(message);
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreBatchRequest {
    pub records: Vec<ScoringRecord>,
    #[serde(default)]
    pub overrides: ScoreOverrides,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreBatchResponse {
    pub results: Vec<ScoreLine>,
    pub summary: BatchSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub table: String,
    pub lexicon: String,
    pub scorer: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route(SCORE_PATH, post(score))
        .route(HEALTH_PATH, get(health))
        .layer(DefaultBodyLimit::max(64 << 20))
        .with_state(state)
}

fn error(status: StatusCode, body: serde_json::Value) -> Response {
    (status, Json(body)).into_response()
}

async fn score(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let request: ScoreBatchRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return error(
                StatusCode::BAD_REQUEST,
                json!({ "error": e.to_string(), "line": e.line(), "column": e.column() }),
            )
        }
    };
    let Some(engine) = state.engine.get().cloned() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, json!({ "error": "reward engine is still loading" }));
    };
    let settings = match engine.settings().apply(&request.overrides) {
        Ok(s) => s,
        Err(e) => return error(StatusCode::BAD_REQUEST, json!({ "error": e.to_string() })),
    };
    let recipe = settings.recipe;
    let scored = tokio::task::spawn_blocking(move || engine.score_batch_with(&request.records, 0, &settings)).await;
    let results = match scored {
        Ok(Ok(results)) => results,
        Ok(Err(e)) => return error(StatusCode::SERVICE_UNAVAILABLE, json!({ "error": e.to_string() })),
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })),
    };
    let outcomes: Vec<Result<RewardBreakdown, RecordError>> = results.iter().map(|(r, _)| r.clone()).collect();
    let lines = results
        .iter()
        .enumerate()
        .map(|(i, (r, elapsed))| ScoreLine {
            latency_ms: Some(elapsed.as_secs_f64() * 1e3),
            ..ScoreLine::new(i, r)
        })
        .collect();
    Json(ScoreBatchResponse {
        results: lines,
        summary: summarize(&outcomes, recipe, &state.config_hash),
    })
    .into_response()
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let hash = state.config_hash.clone();
    let Some(engine) = state.engine.get().cloned() else {
        let failed = state.load_error.lock().unwrap().clone();
        let status = if failed.is_some() { "failed" } else { "loading" };
        return Json(Health {
            status: status.into(),
            table: "loading".into(),
            lexicon: "loading".into(),
            scorer: "unknown".into(),
            config_hash: hash,
            error: failed,
        });
    };
    let scorer = tokio::task::spawn_blocking(move || {
        let table = if engine.has_table() { "loaded" } else { "not-configured" };
        let lexicon = if engine.lexicon().is_some() { "loaded" } else { "not-configured" };
        let scorer = match engine.scorer() {
            _ if !engine.needs_live_scorer() => Ok("precomputed".to_string()),
            None => Err("no client attached".to_string()),
            Some(s) => s.health().map(|_| "reachable".to_string()).map_err(|e| e.to_string()),
        };
        (table, lexicon, scorer)
    })
    .await;
    let (table, lexicon, scorer) = scorer.unwrap_or(("unknown", "unknown", Err("health task failed".into())));
    let (status, scorer, error) = match scorer {
        Ok(s) => ("ready", s, None),
        Err(e) => ("degraded", "unreachable".to_string(), Some(e)),
    };
    Json(Health {
        status: status.into(),
        table: table.into(),
        lexicon: lexicon.into(),
        scorer,
        config_hash: hash,
        error,
    })
}
