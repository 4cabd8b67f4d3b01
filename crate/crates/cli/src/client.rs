//! Blocking HTTP client for an external semantic scorer.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use termalign_core::config::EndpointConfig;
use termalign_core::reward::{
    check_response, ScoreItem, ScoreRequest, ScoreResponse, ScorerError, ScorerHealth, SemanticScorer,
    SCORER_HEALTH_PATH, SEMANTIC_SCORE_PATH,
};

/// Caps the number of requests outstanding against the scorer, across all
/// callers sharing the client.
struct InFlight {
    limit: usize,
    busy: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut busy = self.busy.lock().unwrap();
        while *busy >= self.limit {
            busy = self.freed.wait(busy).unwrap();
        }
        *busy += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpScorer {
    base: String,
    model: String,
    timeout_ms: u64,
    batch_size: usize,
    agent: ureq::Agent,
    in_flight: InFlight,
}

impl HttpScorer {
    pub fn new(config: &EndpointConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Self {
            base: config.url.trim_end_matches('/').to_string(),
            model: config.model.clone(),
            timeout_ms: config.timeout_ms,
            batch_size: config.batch_size.max(1),
            agent,
            in_flight: InFlight {
                limit: config.max_in_flight.max(1),
                busy: Mutex::new(0),
                freed: Condvar::new(),
            },
        }
    }

    fn transport(&self, err: ureq::Error) -> ScorerError {
        match err {
            ureq::Error::Timeout(_) => ScorerError::Timeout { ms: self.timeout_ms },
            ureq::Error::Json(e) => ScorerError::Protocol(e.to_string()),
            ureq::Error::StatusCode(code) => ScorerError::Unavailable(format!("{} answered HTTP {code}", self.base)),
            other => ScorerError::Unavailable(format!("{}: {other}", self.base)),
        }
    }

    fn score_chunk(&self, items: &[ScoreItem]) -> Result<Vec<f64>, ScorerError> {
        let _slot = self.in_flight.acquire();
        let request = ScoreRequest {
            model: self.model.clone(),
            items: items.to_vec(),
        };
        let response: ScoreResponse = self
            .agent
            .post(format!("{}{SEMANTIC_SCORE_PATH}", self.base))
            .send_json(&request)
            .map_err(|e| self.transport(e))?
            .body_mut()
            .read_json()
            .map_err(|e| self.transport(e))?;
        check_response(items.len(), &response)?;
        Ok(response.scores)
    }
}

impl SemanticScorer for HttpScorer {
    fn model(&self) -> &str {
        &self.model
    }

    /// Splits into batches and sends them concurrently, up to the in-flight
    /// limit.
    fn score(&self, items: &[ScoreItem]) -> Result<Vec<f64>, ScorerError> {
        let chunks: Vec<&[ScoreItem]> = items.chunks(self.batch_size).collect();
        if chunks.len() <= 1 {
            return chunks.first().map_or(Ok(Vec::new()), |c| self.score_chunk(c));
        }
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<Vec<f64>, ScorerError>>>> = Mutex::new(vec![None; chunks.len()]);
        let workers = self.in_flight.limit.min(chunks.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(chunk) = chunks.get(i) else { break };
                    let r = self.score_chunk(chunk);
                    results.lock().unwrap()[i] = Some(r);
                });
            }
        });
        let mut scores = Vec::with_capacity(items.len());
        for r in results.into_inner().unwrap() {
            scores.extend(r.expect("every chunk is scored")?);
        }
        Ok(scores)
    }

    fn health(&self) -> Result<(), ScorerError> {
        let health: ScorerHealth = self
            .agent
            .get(format!("{}{SCORER_HEALTH_PATH}", self.base))
            .call()
            .map_err(|e| self.transport(e))?
            .body_mut()
            .read_json()
            .map_err(|e| self.transport(e))?;
        if health.status == "ok" {
            Ok(())
        } else {
            Err(ScorerError::Unavailable(format!("scorer reports status {:?}", health.status)))
        }
    }
}
