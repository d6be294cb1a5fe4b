//! Canonical JSON export of a [`KnowledgeGraph`].

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{canonical_id, is_canonical, Entity, KgError, KnowledgeGraph, RelationTriple, Result};

/// Export document: `version`, then entities sorted by id, then relations
/// sorted by (subject, predicate, object, id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub version: u64,
    pub entities: Vec<Entity>,
    pub relations: Vec<RelationTriple>,
}

impl GraphDocument {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("graph document serializes");
        out.push('\n');
        out
    }

    pub fn from_json(input: &str) -> Result<Self> {
        serde_json::from_str(input).map_err(|e| KgError::SchemaViolation(e.to_string()))
    }
}

impl KnowledgeGraph {
    pub fn to_document(&self) -> GraphDocument {
        let entities = self.entities.values().cloned().collect();
        let mut relations: Vec<RelationTriple> = self.relations.values().cloned().collect();
        relations.sort_by(|a, b| {
            (&a.subject, a.predicate.as_str(), &a.object, &a.id)
                .cmp(&(&b.subject, b.predicate.as_str(), &b.object, &b.id))
        });
        GraphDocument {
            version: self.version,
            entities,
            relations,
        }
    }

    /// Byte-stable JSON export.
    pub fn snapshot(&self) -> String {
        self.to_document().to_json()
    }

    pub fn load(input: &str) -> Result<Self> {
        Self::from_document(GraphDocument::from_json(input)?)
    }

    pub fn from_document(doc: GraphDocument) -> Result<Self> {
        let mut entities = BTreeMap::new();
        for e in doc.entities {
            if e.label.trim().is_empty() || canonical_id(&e.label).is_none() {
                return Err(KgError::SchemaViolation(format!("entity `{}` has an empty label", e.id)));
            }
            if !is_canonical(&e.id) {
                return Err(KgError::SchemaViolation(format!("entity id `{}` is not canonical", e.id)));
            }
            if e.aliases.iter().any(|a| canonical_id(a).as_deref() == Some(e.id.as_str())) {
                return Err(KgError::SchemaViolation(format!(
                    "entity `{}` lists its own label as an alias",
                    e.id
                )));
            }
            if let Some(prev) = entities.insert(e.id.clone(), e) {
                return Err(KgError::SchemaViolation(format!("duplicate entity id `{}`", prev.id)));
            }
        }

        let mut graph = KnowledgeGraph {
            entities,
            version: doc.version,
            ..KnowledgeGraph::default()
        };
        // first owner in id order wins an alias
        let mut alias_index = HashMap::new();
        for e in graph.entities.values() {
            for a in &e.aliases {
                if let Some(key) = canonical_id(a) {
                    if !graph.entities.contains_key(&key) {
                        alias_index.entry(key).or_insert_with(|| e.id.clone());
                    }
                }
            }
        }
        graph.alias_index = alias_index;

        let mut seen_ids = HashSet::new();
        for r in doc.relations {
            if r.id.is_empty() || !seen_ids.insert(r.id.clone()) {
                return Err(KgError::SchemaViolation(format!("duplicate or empty relation id `{}`", r.id)));
            }
            for end in [&r.subject, &r.object] {
                if !graph.entities.contains_key(end) {
                    return Err(KgError::IntegrityViolation(format!(
                        "relation `{}` references missing entity `{end}`",
                        r.id
                    )));
                }
            }
            if r.subject == r.object {
                return Err(KgError::IntegrityViolation(format!("relation `{}` is a self loop", r.id)));
            }
            if r.status.is_live() && graph.live_index.contains_key(&r.key()) {
                return Err(KgError::IntegrityViolation(format!(
                    "relation `{}` duplicates a live triple",
                    r.id
                )));
            }
            graph.insert_relation(r);
        }
        graph.next_seq = graph.relations.len() as u64;
        Ok(graph)
    }
}
