//! Document ingestion: segmentation, lexicon entity extraction, trigger
//! pattern relation extraction and the optional augmenter hook.

mod augment;
mod entities;
mod lexicon;
mod patterns;
mod pipeline;
mod segment;

pub use augment::{
    augment, parse_augmenter_response, AugmentError, AugmentOutcome, Augmenter,
    DEFAULT_AUGMENTER_TIMEOUT,
};
pub use entities::{extract_entities, EntityMatcher, EntityMention};
pub use lexicon::{fold, Lexicon, LexiconEntry, LexiconError};
pub use patterns::{
    extract_relations, parse_patterns, CandidateTriple, ExtractionCandidate, PatternError,
    RelationPattern, TemplateElement,
};
pub use pipeline::{
    ingest_corpus, DocumentFailure, IngestOptions, IngestReport, DEFAULT_MAX_CHUNK_CHARS,
};
pub use segment::{chunk_id, segment_document, Chunk, Document};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("document `{0}` is empty")]
    EmptyDocument(String),
    #[error("chunk budget must be at least one character")]
    InvalidChunkBudget,
}
