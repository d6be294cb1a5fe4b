//! Transport-independent service core shared by the HTTP server and the CLI.
//!
//! Data directory layout:
//!
//! - `graph.json`: graph checkpoint, rewritten after every ingest
//! - `graph.meta.json`: how many review events the checkpoint already reflects
//! - `review.log`: append-only review events (JSON lines)
//! - `sessions.log`: append-only session snapshots (JSON lines)
//! - `lexicon.tsv`, `patterns.tsv`: extraction resources used by the last ingest
//!
//! On open, the checkpoint is loaded and the graph effects of review events
//! logged after it are replayed, reproducing the pre-restart graph version.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::Utc;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use kgtriage_core::curation::{
    apply, parse_review_log, CurationError, DeltaSource, ReviewAction, ReviewEvent, ReviewItem,
    ReviewQueue, Verdict,
};
use kgtriage_core::diagnosis::{DiagnosisEngine, DiagnosisError, DiagnosisOutcome, DiagnosticQuery};
use kgtriage_core::ingestion::{
    ingest_corpus, parse_patterns, Augmenter, Document, IngestOptions, IngestReport, Lexicon,
    RelationPattern,
};
use kgtriage_core::kg::{Category, KgError, KnowledgeGraph, Status};

use crate::config::ServiceConfig;
use crate::session::{Dialog, Session, SessionError};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no knowledge graph is loaded")]
    GraphNotLoaded,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Curation(#[from] CurationError),
    #[error(transparent)]
    Diagnosis(#[from] DiagnosisError),
    #[error(transparent)]
    Graph(#[from] KgError),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
struct CheckpointMeta {
    log_events_applied: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub graph_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub graph_version: u64,
    pub entities: usize,
    pub diseases: usize,
    pub symptoms: usize,
    pub relations: usize,
    pub live_relations: usize,
    pub review_items: usize,
    pub review_pending: usize,
    pub review_events: usize,
    pub sessions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictOutcome {
    pub item: ReviewItem,
    pub graph_version: u64,
    pub delta_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub report: IngestReport,
    pub enqueued: usize,
    pub graph_version: u64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ServiceError + '_ {
    move |source| ServiceError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug)]
struct Store {
    dir: PathBuf,
}

impl Store {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn read_optional(&self, name: &str) -> Result<Option<String>> {
        let path = self.path(name);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Write-then-rename so a crash never leaves a torn file.
    fn write_atomic(&self, name: &str, content: &str) -> Result<()> {
        let path = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        fs::write(&tmp, content).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    fn append_lines(&self, name: &str, lines: &[String]) -> Result<()> {
        if lines.is_empty() {
            return Ok(());
        }
        let path = self.path(name);
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        let mut buf = String::new();
        for l in lines {
            buf.push_str(l);
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(io_err(&path))?;
        file.sync_data().map_err(io_err(&path))
    }
}

#[derive(Debug, Default)]
struct Resources {
    lexicon: Option<Lexicon>,
    patterns: Option<Vec<RelationPattern>>,
}

pub struct Service {
    config: ServiceConfig,
    engine: DiagnosisEngine,
    store: Store,
    graph: RwLock<Option<Arc<KnowledgeGraph>>>,
    review: Mutex<ReviewQueue>,
    resources: RwLock<Resources>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
    // exclusive writer for graph mutations
    writer: Mutex<()>,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service").field("data_dir", &self.store.dir).finish_non_exhaustive()
    }
}

impl Service {
    /// Opens (creating if needed) the configured data directory and recovers
    /// the graph and review queue from it.
    pub fn open(config: ServiceConfig) -> Result<Self> {
        let roster = config.build_roster().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let engine = DiagnosisEngine::new(config.engine.clone(), roster)?;
        fs::create_dir_all(&config.data_dir).map_err(io_err(&config.data_dir))?;
        let store = Store { dir: config.data_dir.clone() };

        let mut resources = Resources::default();
        let lexicon_text = match &config.lexicon {
            Some(p) => Some(fs::read_to_string(p).map_err(io_err(p))?),
            None => store.read_optional("lexicon.tsv")?,
        };
        if let Some(text) = lexicon_text {
            resources.lexicon = Some(Lexicon::parse(&text).map_err(|e| ServiceError::Data(format!("lexicon: {e}")))?);
        }
        let patterns_text = match &config.patterns {
            Some(p) => Some(fs::read_to_string(p).map_err(io_err(p))?),
            None => store.read_optional("patterns.tsv")?,
        };
        if let Some(text) = patterns_text {
            resources.patterns = Some(parse_patterns(&text).map_err(|e| ServiceError::Data(format!("patterns: {e}")))?);
        }

        let events = match store.read_optional("review.log")? {
            Some(text) => parse_review_log(&text)?,
            None => Vec::new(),
        };
        let graph = match store.read_optional("graph.json")? {
            Some(text) => Some(KnowledgeGraph::load(&text)?),
            None => None,
        };
        let meta: CheckpointMeta = match store.read_optional("graph.meta.json")? {
            Some(text) => serde_json::from_str(&text).map_err(|e| ServiceError::Data(format!("graph.meta.json: {e}")))?,
            None => CheckpointMeta::default(),
        };
        if meta.log_events_applied > events.len() {
            return Err(ServiceError::Data("checkpoint is ahead of the review log".into()));
        }
        let (head, tail) = events.split_at(meta.log_events_applied);
        let mut queue = ReviewQueue::new();
        let mut graph = graph;
        if let Some(g) = graph.as_mut() {
            for event in head {
                queue.apply_event(event.clone())?;
                // already merged into the checkpoint; rebuild the delta only
                // to keep the id sequence the live process saw
                if event.action == ReviewAction::Approve {
                    queue.next_delta(g, DeltaSource::ExpertReview)?;
                }
            }
            for event in tail {
                replay_event(&mut queue, g, event)?;
            }
        } else if !events.is_empty() {
            return Err(ServiceError::Data("review log present without a graph checkpoint".into()));
        }

        Ok(Self {
            config,
            engine,
            store,
            graph: RwLock::new(graph.map(Arc::new)),
            review: Mutex::new(queue),
            resources: RwLock::new(resources),
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(0),
            writer: Mutex::new(()),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn engine(&self) -> &DiagnosisEngine {
        &self.engine
    }

    /// Current graph snapshot.
    pub fn graph(&self) -> Result<Arc<KnowledgeGraph>> {
        self.graph.read().clone().ok_or(ServiceError::GraphNotLoaded)
    }

    pub fn health(&self) -> Result<Health> {
        Ok(Health { status: "ok".into(), graph_version: self.graph()?.version() })
    }

    pub fn stats(&self) -> Result<Stats> {
        let g = self.graph()?;
        let review = self.review.lock();
        Ok(Stats {
            graph_version: g.version(),
            entities: g.entity_count(),
            diseases: g.entities_of(Category::Disease).count(),
            symptoms: g.entities_of(Category::Symptom).count(),
            relations: g.relation_count(),
            live_relations: g.live_relation_count(),
            review_items: review.len(),
            review_pending: review.pending().count(),
            review_events: review.log().len(),
            sessions: self.sessions.lock().len(),
        })
    }

    /// Replaces the stored extraction resources.
    pub fn set_resources(&self, lexicon_tsv: Option<&str>, patterns_tsv: Option<&str>) -> Result<()> {
        let lexicon = lexicon_tsv
            .map(|t| Lexicon::parse(t).map_err(|e| ServiceError::BadRequest(format!("lexicon: {e}"))))
            .transpose()?;
        let patterns = patterns_tsv
            .map(|t| parse_patterns(t).map_err(|e| ServiceError::BadRequest(format!("patterns: {e}"))))
            .transpose()?;
        let mut res = self.resources.write();
        if let Some(l) = lexicon {
            self.store.write_atomic("lexicon.tsv", &l.to_tsv())?;
            res.lexicon = Some(l);
        }
        if let (Some(p), Some(text)) = (patterns, patterns_tsv) {
            self.store.write_atomic("patterns.tsv", text)?;
            res.patterns = Some(p);
        }
        Ok(())
    }

    /// Ingests documents into the graph (creating it if absent) and queues
    /// every new extracted or pending-review relation for expert review.
    pub fn ingest(&self, docs: &[Document]) -> Result<IngestSummary> {
        let _w = self.writer.lock();
        let (lexicon, patterns) = {
            let res = self.resources.read();
            let lexicon = res.lexicon.clone().ok_or_else(|| ServiceError::BadRequest("no lexicon configured".into()))?;
            (lexicon, res.patterns.clone().unwrap_or_default())
        };
        let mut graph = self.graph.read().as_deref().cloned().unwrap_or_default();
        let options = IngestOptions {
            max_chunk_chars: self.config.max_chunk_chars,
            augmenter: self
                .config
                .augmenter_endpoint
                .as_ref()
                .map(|e| Augmenter::new(e.clone()).with_timeout(self.config.augmenter_timeout)),
        };
        let report = ingest_corpus(docs, &lexicon, &patterns, &mut graph, &options);
        let triples: Vec<_> = report
            .new_relations
            .iter()
            .filter_map(|id| graph.relation(id))
            .filter(|r| matches!(r.status, Status::Extracted | Status::PendingReview))
            .cloned()
            .collect();
        let mut review = self.review.lock();
        let before = review.log().len();
        let enqueued = review.enqueue(&triples, "ingest", Utc::now()).len();
        let lines: Vec<String> = review.log()[before..].iter().map(ReviewEvent::to_line).collect();
        self.store.append_lines("review.log", &lines)?;
        self.checkpoint(&graph, review.log().len())?;
        let graph_version = graph.version();
        *self.graph.write() = Some(Arc::new(graph));
        Ok(IngestSummary { report, enqueued, graph_version })
    }

    /// Installs a graph wholesale (seeding) and checkpoints it.
    pub fn load_graph(&self, graph: KnowledgeGraph) -> Result<()> {
        graph.check_invariants()?;
        let _w = self.writer.lock();
        let review = self.review.lock();
        self.checkpoint(&graph, review.log().len())?;
        *self.graph.write() = Some(Arc::new(graph));
        Ok(())
    }

    fn checkpoint(&self, graph: &KnowledgeGraph, events: usize) -> Result<()> {
        self.store.write_atomic("graph.json", &graph.snapshot())?;
        let meta = serde_json::to_string(&CheckpointMeta { log_events_applied: events }).expect("meta serializes");
        self.store.write_atomic("graph.meta.json", &meta)
    }

    pub fn export_graph(&self) -> Result<String> {
        Ok(self.graph()?.snapshot())
    }

    /// Review items; only undecided ones unless `all`.
    pub fn review_queue(&self, all: bool) -> Vec<ReviewItem> {
        let review = self.review.lock();
        if all {
            review.items().cloned().collect()
        } else {
            review.pending().cloned().collect()
        }
    }

    /// Records a verdict and applies its graph effect at once: approvals
    /// are merged through a knowledge delta, rejections tombstone the edge.
    pub fn verdict(
        &self,
        item_id: &str,
        verdict: Verdict,
        reviewer: &str,
        expected_revision: u64,
        note: Option<String>,
    ) -> Result<VerdictOutcome> {
        let _w = self.writer.lock();
        let mut graph = self.graph.read().as_deref().cloned().ok_or(ServiceError::GraphNotLoaded)?;
        let mut review = self.review.lock();
        let mut staged = review.clone();
        let item = staged.review(item_id, verdict, reviewer, expected_revision, note, Utc::now())?;
        let delta_id = apply_verdict(&mut staged, &mut graph, &item)?;
        let event = staged.log().last().expect("review appended an event").to_line();
        self.store.append_lines("review.log", &[event])?;
        *review = staged;
        let graph_version = graph.version();
        *self.graph.write() = Some(Arc::new(graph));
        Ok(VerdictOutcome { item, graph_version, delta_id })
    }

    /// Resolves symptom names (ids, labels or aliases) against the graph.
    /// Names that resolve to no symptom stay in the query's raw text only.
    pub fn query_from_symptoms(&self, query_id: &str, symptoms: &[String]) -> Result<DiagnosticQuery> {
        let g = self.graph()?;
        let mut query = DiagnosticQuery::from_symptoms(query_id, std::iter::empty::<String>());
        let mut unresolved = Vec::new();
        for name in symptoms.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
            match g.resolve(name).filter(|id| g.entity(id).is_some_and(|e| e.category == Category::Symptom)) {
                Some(id) => {
                    query.symptom_ids.insert(id.clone());
                }
                None => unresolved.push(name),
            }
        }
        query.raw_text = unresolved.join(", ");
        Ok(query)
    }

    pub fn query_from_text(&self, query_id: &str, text: &str) -> Result<DiagnosticQuery> {
        let g = self.graph()?;
        let res = self.resources.read();
        let empty = Lexicon::new();
        Ok(DiagnosticQuery::from_text(query_id, text, res.lexicon.as_ref().unwrap_or(&empty), &g))
    }

    pub fn diagnose(&self, query: &DiagnosticQuery) -> Result<DiagnosisOutcome> {
        let g = self.graph()?;
        Ok(self.engine.diagnose(query, &g)?)
    }

    fn with_dialog<T>(&self, f: impl FnOnce(&Dialog<'_>) -> Result<T>) -> Result<T> {
        let g = self.graph()?;
        let res = self.resources.read();
        let empty = Lexicon::new();
        let dialog = Dialog {
            engine: &self.engine,
            graph: &g,
            lexicon: res.lexicon.as_ref().unwrap_or(&empty),
            max_questions: self.config.max_clarifying_questions,
        };
        f(&dialog)
    }

    pub fn start_session(&self, text: &str) -> Result<Session> {
        let n = self.next_session.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("session-{n:06}");
        let session = self.with_dialog(|d| Ok(d.start(&id, text, Utc::now())?))?;
        self.log_session(&session)?;
        self.sessions.lock().insert(id, Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    fn session_handle(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session `{id}`")))
    }

    pub fn session(&self, id: &str) -> Result<Session> {
        Ok(self.session_handle(id)?.lock().clone())
    }

    pub fn answer(&self, id: &str, symptom: &str, present: bool) -> Result<Session> {
        let handle = self.session_handle(id)?;
        let mut session = handle.lock();
        self.with_dialog(|d| Ok(d.answer(&mut session, symptom, present, Utc::now())?))?;
        self.log_session(&session)?;
        Ok(session.clone())
    }

    pub fn close_session(&self, id: &str) -> Result<Session> {
        let handle = self.session_handle(id)?;
        let mut session = handle.lock();
        self.with_dialog(|d| Ok(d.close(&mut session, Utc::now())?))?;
        self.log_session(&session)?;
        Ok(session.clone())
    }

    fn log_session(&self, session: &Session) -> Result<()> {
        let line = serde_json::to_string(session).expect("sessions serialize");
        self.store.append_lines("sessions.log", &[line])
    }
}

/// Graph side of a verdict. Returns the id of the delta that carried an
/// approval into the graph.
fn apply_verdict(queue: &mut ReviewQueue, graph: &mut KnowledgeGraph, item: &ReviewItem) -> Result<Option<String>> {
    match item.triple.status {
        Status::Approved => {
            let delta = queue.next_delta(graph, DeltaSource::ExpertReview)?;
            *graph = apply(&delta, graph)?;
            Ok(Some(delta.delta_id))
        }
        Status::Rejected => {
            let open = |r: &kgtriage_core::kg::RelationTriple| matches!(r.status, Status::Extracted | Status::PendingReview);
            if graph.relation(&item.triple.id).is_some_and(open) {
                graph.set_status(&item.triple.id, Status::Rejected)?;
            }
            Ok(None)
        }
        _ => Ok(None),
    }
}

fn replay_event(queue: &mut ReviewQueue, graph: &mut KnowledgeGraph, event: &ReviewEvent) -> Result<()> {
    let single = queue.apply_event(event.clone())?;
    if matches!(event.action, ReviewAction::Approve | ReviewAction::Reject) {
        apply_verdict(queue, graph, &single)?;
    }
    Ok(())
}
