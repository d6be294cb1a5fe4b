use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augment::{augment, AugmentError, AugmentOutcome, Augmenter};
use super::entities::{EntityMatcher, EntityMention};
use super::lexicon::Lexicon;
use super::patterns::{extract_relations, CandidateTriple, RelationPattern};
use super::segment::{segment_document, Chunk, Document};
use super::IngestError;
use crate::kg::{canonical_id, Category, KgError, KnowledgeGraph, Provenance, RelationId, Specialty, Status};

pub const DEFAULT_MAX_CHUNK_CHARS: usize = 1000;

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub max_chunk_chars: usize,
    pub augmenter: Option<Augmenter>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            max_chunk_chars: DEFAULT_MAX_CHUNK_CHARS,
            augmenter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentFailure {
    pub doc_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub documents: usize,
    pub chunks: usize,
    pub mentions: usize,
    /// Pattern hits, counted whether or not the graph already held them.
    pub triples_extracted: usize,
    /// Well-formed augmenter triples accepted as pending-review candidates.
    pub triples_pending: usize,
    pub augmenter_dropped: usize,
    pub augmenter_failures: usize,
    /// Relations inserted by this run, in insertion order.
    pub new_relations: Vec<RelationId>,
    pub failures: Vec<DocumentFailure>,
}

struct ChunkExtraction {
    chunk: Chunk,
    mentions: Vec<EntityMention>,
    triples: Vec<CandidateTriple>,
    augmented: Result<AugmentOutcome, AugmentError>,
}

/// Segments, extracts, optionally augments, and writes everything into
/// `graph`. Extraction runs in parallel per document; graph writes are applied
/// afterwards in corpus order, so the result does not depend on scheduling.
pub fn ingest_corpus(
    docs: &[Document],
    lexicon: &Lexicon,
    patterns: &[RelationPattern],
    graph: &mut KnowledgeGraph,
    options: &IngestOptions,
) -> IngestReport {
    let matcher = EntityMatcher::new(lexicon);
    let extracted: Vec<Result<Vec<ChunkExtraction>, IngestError>> = docs
        .par_iter()
        .map(|doc| {
            let chunks = segment_document(doc, options.max_chunk_chars)?;
            Ok(chunks
                .into_iter()
                .map(|chunk| {
                    let mentions = matcher.find(&chunk.text);
                    let triples = extract_relations(&chunk, &mentions, patterns);
                    let augmented = augment(&chunk, options.augmenter.as_ref());
                    ChunkExtraction {
                        chunk,
                        mentions,
                        triples,
                        augmented,
                    }
                })
                .collect())
        })
        .collect();

    let mut report = IngestReport::default();
    for (doc, result) in docs.iter().zip(extracted) {
        report.documents += 1;
        let chunks = match result {
            Ok(chunks) => chunks,
            Err(e) => {
                report.failures.push(DocumentFailure {
                    doc_id: doc.id.clone(),
                    error: e.to_string(),
                });
                continue;
            }
        };
        for ex in chunks {
            if let Err(e) = write_chunk(graph, lexicon, ex, &mut report) {
                report.failures.push(DocumentFailure {
                    doc_id: doc.id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    report
}

fn write_chunk(
    graph: &mut KnowledgeGraph,
    lexicon: &Lexicon,
    ex: ChunkExtraction,
    report: &mut IngestReport,
) -> Result<(), KgError> {
    report.chunks += 1;
    report.mentions += ex.mentions.len();
    for m in &ex.mentions {
        upsert_mention(graph, m)?;
    }
    for t in &ex.triples {
        report.triples_extracted += 1;
        let (Some(s), Some(o)) = (graph.resolve(&t.subject).cloned(), graph.resolve(&t.object).cloned()) else {
            continue;
        };
        insert(graph, &s, t, &o, Provenance::LexiconExtractor, Status::Extracted, &ex.chunk.id, report)?;
    }

    match ex.augmented {
        Err(_) => report.augmenter_failures += 1,
        Ok(outcome) => {
            report.augmenter_dropped += outcome.dropped;
            for m in &outcome.candidate.mentions {
                upsert_mention(graph, m)?;
            }
            for t in &outcome.candidate.triples {
                let s = ensure_entity(graph, lexicon, &outcome.candidate.mentions, &t.subject)?;
                let o = ensure_entity(graph, lexicon, &outcome.candidate.mentions, &t.object)?;
                if s == o {
                    report.augmenter_dropped += 1;
                    continue;
                }
                report.triples_pending += 1;
                insert(graph, &s, t, &o, Provenance::Augmenter, Status::PendingReview, &ex.chunk.id, report)?;
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn insert(
    graph: &mut KnowledgeGraph,
    subject: &str,
    triple: &CandidateTriple,
    object: &str,
    provenance: Provenance,
    status: Status,
    chunk_id: &str,
    report: &mut IngestReport,
) -> Result<(), KgError> {
    if subject == object {
        return Ok(());
    }
    let before = graph.relation_count();
    let id = graph.add_relation(
        subject,
        triple.predicate.clone(),
        object,
        provenance,
        status,
        Some(chunk_id.to_string()),
    )?;
    if graph.relation_count() > before {
        report.new_relations.push(id);
    }
    Ok(())
}

fn upsert_mention(graph: &mut KnowledgeGraph, m: &EntityMention) -> Result<(), KgError> {
    let alias = (canonical_id(&m.surface) != canonical_id(&m.label)).then_some(m.surface.as_str());
    graph.upsert_entity(&m.label, m.category, m.specialty, alias)?;
    Ok(())
}

fn ensure_entity(
    graph: &mut KnowledgeGraph,
    lexicon: &Lexicon,
    mentions: &[EntityMention],
    label: &str,
) -> Result<String, KgError> {
    if let Some(id) = graph.resolve(label) {
        return Ok(id.clone());
    }
    let id = canonical_id(label);
    let (category, specialty) = lexicon
        .get(label)
        .or_else(|| lexicon.by_label(label))
        .map(|e| (e.category, e.specialty))
        .or_else(|| {
            mentions
                .iter()
                .find(|m| canonical_id(&m.label) == id)
                .map(|m| (m.category, m.specialty))
        })
        .unwrap_or((Category::Other, Specialty::General));
    graph.upsert_entity(label, category, specialty, [] as [&str; 0])
}
