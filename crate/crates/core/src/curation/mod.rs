//! Expert review of extracted relations.
//!
//! Triples are queued as [`ReviewItem`]s, decided once by a reviewer, and
//! every decision is appended to the review event log. Approved triples are
//! later packaged into [`KnowledgeDelta`]s and merged into the graph.

mod delta;
mod log;

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use delta::{apply, DeltaCursor, DeltaSource, KnowledgeDelta};
pub use log::{parse_review_log, ReviewAction, ReviewEvent};

use crate::kg::{Provenance, RelationId, RelationTriple, Status};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurationError {
    #[error("unknown review item `{0}`")]
    UnknownItem(String),
    #[error("review item `{item_id}` is already {state:?}")]
    AlreadyDecided { item_id: String, state: ReviewState },
    #[error("review item `{item_id}` is at revision {current}, not {expected}")]
    RevisionConflict { item_id: String, expected: u64, current: u64 },
    #[error("unknown delta `{0}`")]
    UnknownDelta(String),
    #[error("review log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("integrity violation: {0}")]
    IntegrityViolation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReviewState {
    Pending,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Approve,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub item_id: String,
    pub triple: RelationTriple,
    pub proposed_by: Provenance,
    pub state: ReviewState,
    pub reviewer: Option<String>,
    pub verdict_note: Option<String>,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq)]
struct DeltaMark {
    delta_id: String,
    // log length when the delta was cut
    end: usize,
}

/// Review queue plus the event log it is derived from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReviewQueue {
    items: BTreeMap<String, ReviewItem>,
    order: Vec<String>,
    by_triple: HashMap<RelationId, String>,
    log: Vec<ReviewEvent>,
    deltas: Vec<DeltaMark>,
    next_item: u64,
}

impl ReviewQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a queue by replaying a log from the start.
    pub fn replay(events: impl IntoIterator<Item = ReviewEvent>) -> Result<Self, CurationError> {
        let mut queue = Self::new();
        for event in events {
            queue.apply_event(event)?;
        }
        Ok(queue)
    }

    /// Applies one logged event as if it had just happened, returning the
    /// affected item.
    pub fn apply_event(&mut self, event: ReviewEvent) -> Result<ReviewItem, CurationError> {
        match event.action {
            ReviewAction::Enqueue => {
                if self.items.contains_key(&event.item_id) || self.by_triple.contains_key(&event.triple.id) {
                    return Err(CurationError::IntegrityViolation(format!(
                        "item `{}` enqueued twice",
                        event.item_id
                    )));
                }
                if let Some(n) = event.item_id.strip_prefix("item-").and_then(|n| n.parse::<u64>().ok()) {
                    self.next_item = self.next_item.max(n);
                }
                let item = self.insert_item(event.item_id.clone(), event.triple.clone());
                self.log.push(event);
                Ok(item)
            }
            ReviewAction::Approve | ReviewAction::Reject => {
                let verdict = if event.action == ReviewAction::Approve { Verdict::Approve } else { Verdict::Reject };
                let current = self
                    .items
                    .get(&event.item_id)
                    .ok_or_else(|| CurationError::UnknownItem(event.item_id.clone()))?
                    .revision;
                self.review(&event.item_id, verdict, &event.actor, current, event.note.clone(), event.ts)
            }
        }
    }

    fn insert_item(&mut self, item_id: String, triple: RelationTriple) -> ReviewItem {
        let item = ReviewItem {
            item_id: item_id.clone(),
            proposed_by: triple.provenance,
            triple: RelationTriple {
                status: Status::PendingReview,
                ..triple
            },
            state: ReviewState::Pending,
            reviewer: None,
            verdict_note: None,
            revision: 0,
        };
        self.by_triple.insert(item.triple.id.clone(), item_id.clone());
        self.order.push(item_id.clone());
        self.items.insert(item_id, item.clone());
        item
    }

    /// Queues one pending item per triple not seen before (by relation id).
    /// Triples whose status is not extracted or pending-review are ignored.
    pub fn enqueue(&mut self, triples: &[RelationTriple], actor: &str, ts: DateTime<Utc>) -> Vec<ReviewItem> {
        let mut created = Vec::new();
        for triple in triples {
            if !matches!(triple.status, Status::Extracted | Status::PendingReview)
                || self.by_triple.contains_key(&triple.id)
            {
                continue;
            }
            self.next_item += 1;
            let item_id = format!("item-{:06}", self.next_item);
            let item = self.insert_item(item_id.clone(), triple.clone());
            self.log.push(ReviewEvent {
                ts,
                item_id,
                actor: actor.to_string(),
                action: ReviewAction::Enqueue,
                triple: item.triple.clone(),
                note: None,
            });
            created.push(item);
        }
        created
    }

    /// Records a verdict. The revision check comes first, so a stale writer
    /// sees `RevisionConflict` even when the item has since been decided.
    pub fn review(
        &mut self,
        item_id: &str,
        verdict: Verdict,
        reviewer: &str,
        expected_revision: u64,
        note: Option<String>,
        ts: DateTime<Utc>,
    ) -> Result<ReviewItem, CurationError> {
        let item = self
            .items
            .get_mut(item_id)
            .ok_or_else(|| CurationError::UnknownItem(item_id.to_string()))?;
        if item.revision != expected_revision {
            return Err(CurationError::RevisionConflict {
                item_id: item_id.to_string(),
                expected: expected_revision,
                current: item.revision,
            });
        }
        if item.state != ReviewState::Pending {
            return Err(CurationError::AlreadyDecided {
                item_id: item_id.to_string(),
                state: item.state,
            });
        }
        let (state, status, action) = match verdict {
            Verdict::Approve => (ReviewState::Approved, Status::Approved, ReviewAction::Approve),
            Verdict::Reject => (ReviewState::Rejected, Status::Rejected, ReviewAction::Reject),
        };
        item.state = state;
        item.triple.status = status;
        item.reviewer = Some(reviewer.to_string());
        item.verdict_note = note.clone();
        item.revision += 1;
        let item = item.clone();
        self.log.push(ReviewEvent {
            ts,
            item_id: item_id.to_string(),
            actor: reviewer.to_string(),
            action,
            triple: item.triple.clone(),
            note,
        });
        Ok(item)
    }

    pub fn item(&self, item_id: &str) -> Option<&ReviewItem> {
        self.items.get(item_id)
    }

    pub fn item_for_triple(&self, relation_id: &str) -> Option<&ReviewItem> {
        self.by_triple.get(relation_id).and_then(|id| self.items.get(id))
    }

    /// All items in creation order.
    pub fn items(&self) -> impl Iterator<Item = &ReviewItem> {
        self.order.iter().map(|id| &self.items[id])
    }

    /// Undecided items in FIFO order.
    pub fn pending(&self) -> impl Iterator<Item = &ReviewItem> {
        self.items().filter(|i| i.state == ReviewState::Pending)
    }

    pub fn log(&self) -> &[ReviewEvent] {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}
