//! Knowledge graph store.
//!
//! Nodes are [`Entity`] values keyed by canonical id; edges are
//! [`RelationTriple`] values keyed by an opaque relation id. Rejected edges
//! are kept as tombstones so a later extraction of the same triple can be told
//! apart from a new one. The store enforces referential integrity and
//! deduplicates live edges on their (subject, predicate, object) projection.

mod canonical;
mod document;
mod types;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use canonical::{canonical_id, is_canonical};
pub use document::GraphDocument;
pub use types::{
    Category, Entity, EntityId, ParsePredicateError, Predicate, Provenance, RelationId,
    RelationTriple, Specialty, Status, TripleKey,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KgError {
    #[error("label `{0}` normalizes to an empty id")]
    EmptyLabel(String),
    #[error("relation endpoint `{0}` does not resolve to an entity")]
    DanglingEndpoint(EntityId),
    #[error("relation subject and object are both `{0}`")]
    SelfLoop(EntityId),
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("unknown relation `{0}`")]
    UnknownRelation(RelationId),
    #[error("relation `{0}` is not approved")]
    UnapprovedInput(RelationId),
    #[error("relation `{id}` cannot move from {from} to {to}")]
    IllegalTransition { id: RelationId, from: Status, to: Status },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("integrity violation: {0}")]
    IntegrityViolation(String),
}

pub type Result<T, E = KgError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: BTreeMap<EntityId, Entity>,
    relations: BTreeMap<RelationId, RelationTriple>,
    // canonical(alias) -> owning entity
    alias_index: HashMap<String, EntityId>,
    live_index: HashMap<TripleKey, RelationId>,
    version: u64,
    next_seq: u64,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version && self.same_content(other)
    }
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn live_relation_count(&self) -> usize {
        self.live_index.len()
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn relation(&self, id: &str) -> Option<&RelationTriple> {
        self.relations.get(id)
    }

    /// Entities in id order.
    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    /// Relations in id order, tombstones included.
    pub fn relations(&self) -> impl Iterator<Item = &RelationTriple> {
        self.relations.values()
    }

    pub fn entities_of(&self, category: Category) -> impl Iterator<Item = &Entity> {
        self.entities.values().filter(move |e| e.category == category)
    }

    /// Live relation carrying the given (subject, predicate, object), if any.
    pub fn find_live(&self, key: &TripleKey) -> Option<&RelationTriple> {
        self.live_index.get(key).and_then(|id| self.relations.get(id))
    }

    /// Resolves a label or alias to the id of an existing entity.
    pub fn resolve(&self, label: &str) -> Option<&EntityId> {
        let id = canonical_id(label)?;
        if let Some((key, _)) = self.entities.get_key_value(&id) {
            return Some(key);
        }
        self.alias_index.get(&id)
    }

    /// Same entities, relations and statuses; the version counter is ignored.
    pub fn same_content(&self, other: &Self) -> bool {
        self.entities == other.entities && self.relations == other.relations
    }

    fn bump(&mut self) {
        self.version += 1;
    }

    /// Inserts an entity or merges into the one its label or aliases already
    /// resolve to. Returns the canonical id.
    pub fn upsert_entity<I, S>(
        &mut self,
        label: &str,
        category: Category,
        specialty: Specialty,
        aliases: I,
    ) -> Result<EntityId>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let label = label.trim();
        let id = canonical_id(label).ok_or_else(|| KgError::EmptyLabel(label.to_string()))?;
        let aliases: Vec<String> = aliases
            .into_iter()
            .map(|a| a.as_ref().trim().to_string())
            .filter(|a| canonical_id(a).is_some())
            .collect();

        let existing = self.resolve(label).cloned().or_else(|| {
            aliases
                .iter()
                .find_map(|alias| self.resolve(alias).cloned())
        });

        match existing {
            Some(target) => {
                let mut extra = aliases;
                if target != id {
                    extra.push(label.to_string());
                }
                if self.merge_aliases(&target, extra) {
                    self.bump();
                }
                Ok(target)
            }
            None => {
                let entity = Entity {
                    id: id.clone(),
                    label: label.to_string(),
                    category,
                    specialty,
                    aliases: BTreeSet::new(),
                };
                self.entities.insert(id.clone(), entity);
                self.merge_aliases(&id, aliases);
                self.bump();
                Ok(id)
            }
        }
    }

    /// Adds aliases that are not already owned by another entity. Returns
    /// whether anything changed.
    fn merge_aliases(&mut self, target: &str, aliases: Vec<String>) -> bool {
        let mut changed = false;
        for alias in aliases {
            let Some(key) = canonical_id(&alias) else { continue };
            if key == target {
                continue;
            }
            let owner = if self.entities.contains_key(&key) {
                Some(key.as_str())
            } else {
                self.alias_index.get(&key).map(String::as_str)
            };
            if owner.is_some_and(|o| o != target) {
                continue;
            }
            let entity = self.entities.get_mut(target).expect("merge target exists");
            if entity.aliases.iter().any(|a| canonical_id(a).as_deref() == Some(&key)) {
                continue;
            }
            entity.aliases.insert(alias);
            self.alias_index.insert(key, target.to_string());
            changed = true;
        }
        changed
    }

    fn fresh_relation_id(&mut self) -> RelationId {
        loop {
            self.next_seq += 1;
            let id = format!("rel-{:06}", self.next_seq);
            if !self.relations.contains_key(&id) {
                return id;
            }
        }
    }

    fn check_endpoints(&self, subject: &str, object: &str) -> Result<()> {
        for end in [subject, object] {
            if !self.entities.contains_key(end) {
                return Err(KgError::DanglingEndpoint(end.to_string()));
            }
        }
        if subject == object {
            return Err(KgError::SelfLoop(subject.to_string()));
        }
        Ok(())
    }

    /// Inserts a relation unless a live duplicate exists, in which case the
    /// existing id is returned and the graph is left untouched.
    pub fn add_relation(
        &mut self,
        subject: &str,
        predicate: Predicate,
        object: &str,
        provenance: Provenance,
        status: Status,
        source_chunk: Option<String>,
    ) -> Result<RelationId> {
        self.check_endpoints(subject, object)?;
        let key = TripleKey {
            subject: subject.to_string(),
            predicate,
            object: object.to_string(),
        };
        if status.is_live() {
            if let Some(existing) = self.live_index.get(&key) {
                return Ok(existing.clone());
            }
        }
        let id = self.fresh_relation_id();
        self.insert_relation(RelationTriple {
            id: id.clone(),
            subject: key.subject,
            predicate: key.predicate,
            object: key.object,
            provenance,
            status,
            source_chunk,
        });
        self.bump();
        Ok(id)
    }

    fn insert_relation(&mut self, triple: RelationTriple) {
        if triple.status.is_live() {
            self.live_index.insert(triple.key(), triple.id.clone());
        }
        self.relations.insert(triple.id.clone(), triple);
    }

    /// Moves a relation along the review lifecycle, passing through
    /// intermediate states as needed (extracted -> approved goes via
    /// pending-review). No-op when the relation already has `status`.
    pub fn set_status(&mut self, id: &str, status: Status) -> Result<()> {
        if self.set_status_quiet(id, status)? {
            self.bump();
        }
        Ok(())
    }

    fn set_status_quiet(&mut self, id: &str, status: Status) -> Result<bool> {
        let rel = self
            .relations
            .get_mut(id)
            .ok_or_else(|| KgError::UnknownRelation(id.to_string()))?;
        let path = rel.status.path_to(status).ok_or_else(|| KgError::IllegalTransition {
            id: id.to_string(),
            from: rel.status,
            to: status,
        })?;
        if path.is_empty() {
            return Ok(false);
        }
        rel.status = status;
        if !status.is_live() {
            let key = rel.key();
            self.live_index.remove(&key);
        }
        Ok(true)
    }

    /// Returns the union of this graph with expert-approved content.
    pub fn expand_graph(&self, entities: &[Entity], approved: &[RelationTriple]) -> Result<Self> {
        let mut next = self.clone();
        next.expand(entities, approved)?;
        Ok(next)
    }

    /// In-place form of [`expand_graph`](Self::expand_graph). Atomic: on error
    /// the graph is unchanged. The version advances by one on success, even
    /// when the input adds nothing new.
    pub fn expand(&mut self, entities: &[Entity], approved: &[RelationTriple]) -> Result<()> {
        if let Some(t) = approved.iter().find(|t| t.status != Status::Approved) {
            return Err(KgError::UnapprovedInput(t.id.clone()));
        }
        let mut work = self.clone();
        for entity in entities {
            if !is_canonical(&entity.id) {
                return Err(KgError::SchemaViolation(format!(
                    "entity id `{}` is not canonical",
                    entity.id
                )));
            }
            if work.entities.contains_key(&entity.id) {
                work.merge_aliases(&entity.id, entity.aliases.iter().cloned().collect());
            } else {
                work.entities.insert(
                    entity.id.clone(),
                    Entity {
                        aliases: BTreeSet::new(),
                        ..entity.clone()
                    },
                );
                work.merge_aliases(&entity.id, entity.aliases.iter().cloned().collect());
            }
        }
        for triple in approved {
            match work.check_endpoints(&triple.subject, &triple.object) {
                Err(KgError::DanglingEndpoint(id)) => {
                    return Err(KgError::IntegrityViolation(format!(
                        "relation `{}` references missing entity `{id}`",
                        triple.id
                    )))
                }
                Err(e) => return Err(e),
                Ok(()) => {}
            }
            if let Some(existing) = work.live_index.get(&triple.key()).cloned() {
                work.set_status_quiet(&existing, Status::Approved)?;
                continue;
            }
            let id = if work.relations.contains_key(&triple.id) {
                work.fresh_relation_id()
            } else {
                triple.id.clone()
            };
            work.insert_relation(RelationTriple {
                id,
                status: Status::Approved,
                ..triple.clone()
            });
        }
        work.version = self.version + 1;
        *self = work;
        Ok(())
    }

    /// Objects of `has-symptom` edges leaving `disease` whose status is in
    /// `statuses`, sorted by id.
    pub fn symptoms_of(&self, disease: &str, statuses: &[Status]) -> Result<Vec<EntityId>> {
        if !self.entities.contains_key(disease) {
            return Err(KgError::UnknownEntity(disease.to_string()));
        }
        let set: BTreeSet<&EntityId> = self
            .relations
            .values()
            .filter(|r| {
                r.subject == disease
                    && r.predicate == Predicate::HasSymptom
                    && statuses.contains(&r.status)
            })
            .map(|r| &r.object)
            .collect();
        Ok(set.into_iter().cloned().collect())
    }

    /// Verifies referential integrity, dedup and the index caches.
    pub fn check_invariants(&self) -> Result<()> {
        let mut live = HashMap::new();
        for r in self.relations.values() {
            if !self.entities.contains_key(&r.subject) || !self.entities.contains_key(&r.object) {
                return Err(KgError::IntegrityViolation(format!(
                    "relation `{}` has a dangling endpoint",
                    r.id
                )));
            }
            if r.subject == r.object {
                return Err(KgError::IntegrityViolation(format!("relation `{}` is a self loop", r.id)));
            }
            if r.status.is_live() && live.insert(r.key(), r.id.clone()).is_some() {
                return Err(KgError::IntegrityViolation(format!(
                    "relation `{}` duplicates a live triple",
                    r.id
                )));
            }
        }
        if live != self.live_index {
            return Err(KgError::IntegrityViolation("live index out of sync".into()));
        }
        for (id, e) in &self.entities {
            if id != &e.id || !is_canonical(id) {
                return Err(KgError::IntegrityViolation(format!("entity id `{id}` is malformed")));
            }
            if e.aliases.iter().any(|a| canonical_id(a).as_deref() == Some(id.as_str())) {
                return Err(KgError::IntegrityViolation(format!(
                    "entity `{id}` lists its own label as an alias"
                )));
            }
        }
        Ok(())
    }
}
