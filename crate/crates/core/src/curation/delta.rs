use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CurationError, DeltaMark, ReviewAction, ReviewQueue};
use crate::kg::{Entity, KgError, KnowledgeGraph, RelationTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaSource {
    ExpertReview,
    ConsultantFeedback,
}

/// Where a delta starts reading the review log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaCursor {
    Start,
    AfterDelta(String),
    Since(DateTime<Utc>),
}

/// Approved knowledge to merge into the GP's view. `entities` carries every
/// endpoint of `approved_triples`, so a delta is self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeDelta {
    pub delta_id: String,
    pub approved_triples: Vec<RelationTriple>,
    pub entities: Vec<Entity>,
    pub source: DeltaSource,
    pub created_at: DateTime<Utc>,
}

impl KnowledgeDelta {
    pub fn is_noop(&self) -> bool {
        self.approved_triples.is_empty()
    }
}

impl ReviewQueue {
    /// Collects the triples approved after `cursor`, in log order. Endpoint
    /// entities are copied from `graph`. `created_at` is the timestamp of the
    /// newest event considered, which keeps the delta a function of the log.
    pub fn build_delta(
        &mut self,
        cursor: &DeltaCursor,
        graph: &KnowledgeGraph,
        source: DeltaSource,
    ) -> Result<KnowledgeDelta, CurationError> {
        let start = match cursor {
            DeltaCursor::Start => 0,
            DeltaCursor::AfterDelta(id) => self
                .deltas
                .iter()
                .find(|d| &d.delta_id == id)
                .map(|d| d.end)
                .ok_or_else(|| CurationError::UnknownDelta(id.clone()))?,
            DeltaCursor::Since(ts) => self.log.iter().position(|e| e.ts > *ts).unwrap_or(self.log.len()),
        };
        let window = &self.log[start..];
        let approved_triples: Vec<RelationTriple> = window
            .iter()
            .filter(|e| e.action == ReviewAction::Approve)
            .map(|e| e.triple.clone())
            .collect();
        let mut entities = BTreeMap::new();
        for t in &approved_triples {
            for id in [&t.subject, &t.object] {
                let entity = graph.entity(id).ok_or_else(|| {
                    CurationError::IntegrityViolation(format!("triple `{}` references missing entity `{id}`", t.id))
                })?;
                entities.insert(id.clone(), entity.clone());
            }
        }
        let created_at = match (self.log.last(), cursor) {
            (Some(e), _) => e.ts,
            (None, DeltaCursor::Since(ts)) => *ts,
            (None, _) => DateTime::<Utc>::UNIX_EPOCH,
        };
        let delta_id = format!("delta-{:06}", self.deltas.len() + 1);
        self.deltas.push(DeltaMark {
            delta_id: delta_id.clone(),
            end: self.log.len(),
        });
        Ok(KnowledgeDelta {
            delta_id,
            approved_triples,
            entities: entities.into_values().collect(),
            source,
            created_at,
        })
    }

    /// Delta covering everything approved since the previous delta.
    pub fn next_delta(&mut self, graph: &KnowledgeGraph, source: DeltaSource) -> Result<KnowledgeDelta, CurationError> {
        let cursor = self
            .deltas
            .last()
            .map_or(DeltaCursor::Start, |d| DeltaCursor::AfterDelta(d.delta_id.clone()));
        self.build_delta(&cursor, graph, source)
    }
}

/// Merges a delta into `graph`, returning the expanded graph.
pub fn apply(delta: &KnowledgeDelta, graph: &KnowledgeGraph) -> Result<KnowledgeGraph, KgError> {
    graph.expand_graph(&delta.entities, &delta.approved_triples)
}
