//! Knowledge-graph-backed hierarchical diagnostic triage.
//!
//! - [`kg`]: entity/relation store with referential integrity and snapshots
//! - [`ingestion`]: segmentation, lexicon entity extraction, pattern relation
//!   extraction and the optional external augmenter
//! - [`diagnosis`]: GP scoring, referral, transfer and consultant aggregation
//! - [`curation`]: expert review queue and knowledge deltas

pub mod kg;
pub mod ingestion;
pub mod diagnosis;
pub mod curation;
