use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::DiagnosisError;
use crate::kg::{Category, EntityId, KnowledgeGraph, Specialty, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDiagnosis {
    pub diagnosis_id: EntityId,
    pub confidence: f64,
}

impl ScoredDiagnosis {
    pub fn new(id: impl Into<String>, confidence: f64) -> Self {
        Self {
            diagnosis_id: id.into(),
            confidence,
        }
    }
}

/// Confidence descending, then id ascending.
pub fn rank_order(a: &ScoredDiagnosis, b: &ScoredDiagnosis) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.diagnosis_id.cmp(&b.diagnosis_id))
}

pub fn sort_ranking(ranking: &mut [ScoredDiagnosis]) {
    ranking.sort_by(rank_order);
}

/// Fraction of a disease's trusted symptoms present in `symptoms`; zero when
/// the disease has no symptoms.
pub fn kg_confidence(
    symptoms: &BTreeSet<EntityId>,
    disease: &str,
    graph: &KnowledgeGraph,
    statuses: &[Status],
) -> Result<f64, DiagnosisError> {
    let entity = graph
        .entity(disease)
        .ok_or_else(|| DiagnosisError::UnknownEntity(disease.to_string()))?;
    if entity.category != Category::Disease {
        return Err(DiagnosisError::NotADisease(disease.to_string()));
    }
    let own = graph
        .symptoms_of(disease, statuses)
        .map_err(|_| DiagnosisError::UnknownEntity(disease.to_string()))?;
    if own.is_empty() {
        return Ok(0.0);
    }
    let hits = own.iter().filter(|s| symptoms.contains(*s)).count();
    Ok(hits as f64 / own.len() as f64)
}

/// What a diagnostic function is asked. `domain == None` means every disease
/// (the GP view); otherwise only diseases tagged with that specialty.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRequest<'a> {
    pub query_id: &'a str,
    pub symptom_ids: &'a BTreeSet<EntityId>,
    pub domain: Option<Specialty>,
    pub top_k: usize,
    pub statuses: &'a [Status],
}

/// Maps a query over a graph view to a ranked list of diagnoses.
/// Implementations return confidences in `[0, 1]`, sorted by
/// [`rank_order`] and truncated to `top_k`.
pub trait DiagnosticFunction: Send + Sync + std::fmt::Debug {
    fn score(&self, request: &ScoreRequest<'_>, graph: &KnowledgeGraph) -> Result<Vec<ScoredDiagnosis>, DiagnosisError>;
}

/// Deterministic symptom-overlap scorer over the knowledge graph.
#[derive(Debug, Clone, Copy, Default)]
pub struct KgOverlapScorer;

impl DiagnosticFunction for KgOverlapScorer {
    fn score(&self, request: &ScoreRequest<'_>, graph: &KnowledgeGraph) -> Result<Vec<ScoredDiagnosis>, DiagnosisError> {
        let mut ranking = graph
            .entities_of(Category::Disease)
            .filter(|d| request.domain.is_none_or(|s| d.specialty == s))
            .map(|d| {
                kg_confidence(request.symptom_ids, &d.id, graph, request.statuses)
                    .map(|c| ScoredDiagnosis::new(d.id.clone(), c))
            })
            .collect::<Result<Vec<_>, _>>()?;
        sort_ranking(&mut ranking);
        ranking.truncate(request.top_k);
        Ok(ranking)
    }
}
