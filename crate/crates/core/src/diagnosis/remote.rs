//! Diagnostic function served over HTTP.
//!
//! Request: `POST {"query_id", "symptom_ids": [...], "specialty", "top_k"}`.
//! Response: `{"results": [{"diagnosis_id", "confidence"}]}`. Confidences
//! outside `[0, 1]` are clamped and counted as protocol warnings.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::scoring::{sort_ranking, DiagnosticFunction, ScoreRequest, ScoredDiagnosis};
use super::DiagnosisError;
use crate::kg::{KnowledgeGraph, Specialty};

#[derive(Debug, Serialize)]
struct RemoteRequest<'a> {
    query_id: &'a str,
    symptom_ids: &'a BTreeSet<String>,
    specialty: Specialty,
    top_k: usize,
}

#[derive(Debug, Deserialize)]
struct RemoteResponse {
    results: Vec<RemoteResult>,
}

#[derive(Debug, Deserialize)]
struct RemoteResult {
    diagnosis_id: String,
    confidence: f64,
}

/// Decoded scorer response: the ranking (sorted, clamped) and how many
/// confidences had to be clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerResponse {
    pub results: Vec<ScoredDiagnosis>,
    pub warnings: usize,
}

pub fn parse_scorer_response(body: &[u8]) -> Result<ScorerResponse, DiagnosisError> {
    let parsed: RemoteResponse =
        serde_json::from_slice(body).map_err(|e| DiagnosisError::ScorerProtocol(e.to_string()))?;
    let mut warnings = 0;
    let mut seen = BTreeSet::new();
    let mut results = Vec::with_capacity(parsed.results.len());
    for r in parsed.results {
        if r.diagnosis_id.is_empty() || !seen.insert(r.diagnosis_id.clone()) {
            return Err(DiagnosisError::ScorerProtocol(format!(
                "empty or repeated diagnosis id `{}`",
                r.diagnosis_id
            )));
        }
        let clamped = r.confidence.clamp(0.0, 1.0);
        if clamped != r.confidence {
            warnings += 1;
        }
        results.push(ScoredDiagnosis::new(r.diagnosis_id, clamped));
    }
    sort_ranking(&mut results);
    Ok(ScorerResponse { results, warnings })
}

#[derive(Debug, Clone)]
pub struct RemoteScorer {
    endpoint: String,
    timeout: Duration,
    warnings: Arc<AtomicUsize>,
}

impl RemoteScorer {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout,
            warnings: Arc::default(),
        }
    }

    /// Protocol warnings seen so far (clamped confidences).
    pub fn warnings(&self) -> usize {
        self.warnings.load(Ordering::Relaxed)
    }
}

impl DiagnosticFunction for RemoteScorer {
    fn score(&self, request: &ScoreRequest<'_>, _graph: &KnowledgeGraph) -> Result<Vec<ScoredDiagnosis>, DiagnosisError> {
        let unavailable = |e: reqwest::Error| DiagnosisError::ScorerUnavailable(e.to_string());
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(unavailable)?;
        let response = client
            .post(&self.endpoint)
            .json(&RemoteRequest {
                query_id: request.query_id,
                symptom_ids: request.symptom_ids,
                specialty: request.domain.unwrap_or(Specialty::General),
                top_k: request.top_k,
            })
            .send()
            .map_err(unavailable)?;
        if !response.status().is_success() {
            return Err(DiagnosisError::ScorerUnavailable(format!("status {}", response.status())));
        }
        let body = response.bytes().map_err(unavailable)?;
        let mut parsed = parse_scorer_response(&body)?;
        self.warnings.fetch_add(parsed.warnings, Ordering::Relaxed);
        parsed.results.truncate(request.top_k);
        Ok(parsed.results)
    }
}
