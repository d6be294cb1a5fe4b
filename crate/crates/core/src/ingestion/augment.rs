//! Client for an external context-aware extractor.
//!
//! Request: `POST {"chunk_id", "text"}`. Response:
//! `{"mentions": [...], "triples": [{"subject", "predicate", "object", "confidence"}]}`.
//! Malformed entries are dropped one by one and counted; only a response that
//! is not a JSON object with those arrays is a protocol error.

use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use super::entities::EntityMention;
use super::lexicon::parse_enum;
use super::patterns::{CandidateTriple, ExtractionCandidate};
use super::Chunk;
use crate::kg::{canonical_id, Category, Predicate, Provenance, Specialty};

pub const DEFAULT_AUGMENTER_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AugmentError {
    #[error("augmenter unavailable: {0}")]
    Unavailable(String),
    #[error("augmenter protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Serialize)]
struct AugmentRequest<'a> {
    chunk_id: &'a str,
    text: &'a str,
}

/// Parsed augmenter response plus the number of entries that were discarded.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AugmentOutcome {
    pub candidate: ExtractionCandidate,
    pub dropped: usize,
}

#[derive(Debug, Clone)]
pub struct Augmenter {
    endpoint: String,
    timeout: Duration,
}

impl Augmenter {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: DEFAULT_AUGMENTER_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn augment(&self, chunk: &Chunk) -> Result<AugmentOutcome, AugmentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| AugmentError::Unavailable(e.to_string()))?;
        let response = client
            .post(&self.endpoint)
            .json(&AugmentRequest {
                chunk_id: &chunk.id,
                text: &chunk.text,
            })
            .send()
            .map_err(|e| AugmentError::Unavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(AugmentError::Unavailable(format!("status {}", response.status())));
        }
        let body = response
            .bytes()
            .map_err(|e| AugmentError::Unavailable(e.to_string()))?;
        parse_augmenter_response(&body, chunk.text.len())
    }
}

/// Runs the augmenter when one is configured; otherwise returns nothing.
pub fn augment(chunk: &Chunk, augmenter: Option<&Augmenter>) -> Result<AugmentOutcome, AugmentError> {
    match augmenter {
        None => Ok(AugmentOutcome::default()),
        Some(a) => a.augment(chunk),
    }
}

/// Decodes a response body. `chunk_len` bounds mention offsets.
pub fn parse_augmenter_response(body: &[u8], chunk_len: usize) -> Result<AugmentOutcome, AugmentError> {
    let value: Value =
        serde_json::from_slice(body).map_err(|e| AugmentError::Protocol(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| AugmentError::Protocol("response is not an object".into()))?;
    let array = |key: &str| -> Result<&[Value], AugmentError> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(&[]),
            Some(Value::Array(a)) => Ok(a.as_slice()),
            Some(_) => Err(AugmentError::Protocol(format!("`{key}` is not an array"))),
        }
    };
    let raw_mentions = array("mentions")?;
    let raw_triples = array("triples")?;

    let mut outcome = AugmentOutcome::default();
    for m in raw_mentions {
        match decode_mention(m, chunk_len) {
            Some(m) => outcome.candidate.mentions.push(m),
            None => outcome.dropped += 1,
        }
    }
    for t in raw_triples {
        match decode_triple(t) {
            Some(t) => outcome.candidate.triples.push(t),
            None => outcome.dropped += 1,
        }
    }
    Ok(outcome)
}

fn decode_mention(v: &Value, chunk_len: usize) -> Option<EntityMention> {
    let label = v.get("label").or_else(|| v.get("surface"))?.as_str()?;
    canonical_id(label)?;
    let surface = v.get("surface").and_then(Value::as_str).unwrap_or(label);
    let category = match v.get("category").and_then(Value::as_str) {
        Some(c) => parse_enum::<Category>(c, "category", 0).ok()?,
        None => Category::Other,
    };
    let specialty = match v.get("specialty").and_then(Value::as_str) {
        Some(s) => parse_enum::<Specialty>(s, "specialty", 0).ok()?,
        None => Specialty::General,
    };
    let offset = |key: &str| v.get(key).and_then(Value::as_u64).map(|n| n as usize);
    let range = match (offset("start"), offset("end")) {
        (Some(s), Some(e)) if s <= e && e <= chunk_len => (s, e),
        (None, None) => (0, 0),
        _ => return None,
    };
    Some(EntityMention {
        surface: surface.to_string(),
        label: label.trim().to_string(),
        category,
        specialty,
        range,
    })
}

fn decode_triple(v: &Value) -> Option<CandidateTriple> {
    let subject = v.get("subject")?.as_str()?;
    let object = v.get("object")?.as_str()?;
    let predicate: Predicate = v.get("predicate")?.as_str()?.parse().ok()?;
    let confidence = v.get("confidence")?.as_f64()?;
    if !(0.0..=1.0).contains(&confidence) {
        return None;
    }
    let (s, o) = (canonical_id(subject)?, canonical_id(object)?);
    if s == o {
        return None;
    }
    Some(CandidateTriple {
        subject: subject.trim().to_string(),
        predicate,
        object: object.trim().to_string(),
        confidence,
        provenance: Provenance::Augmenter,
    })
}
