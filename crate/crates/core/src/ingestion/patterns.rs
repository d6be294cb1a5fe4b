//! Trigger-word relation patterns.
//!
//! Pattern file lines are `pattern-id<TAB>predicate<TAB>template<TAB>max-gap`,
//! where the template is a whitespace-separated word sequence containing the
//! slots `{1}` (subject) and `{2}` (object) exactly once each, e.g.
//! `{1} reduces risk {2}`. Consecutive template elements may be separated by at
//! most `max-gap` tokens of text, and a match never spans two sentences.

use serde::{Deserialize, Serialize};

use super::entities::EntityMention;
use super::lexicon::fold;
use super::Chunk;
use crate::kg::{canonical_id, Predicate, Provenance};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateElement {
    Subject,
    Object,
    Word(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationPattern {
    pub id: String,
    pub predicate: Predicate,
    pub trigger: Vec<TemplateElement>,
    pub max_gap: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("line {line}: expected 4 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: empty pattern id")]
    EmptyId { line: usize },
    #[error("line {line}: duplicate pattern id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {source}")]
    Predicate {
        line: usize,
        source: crate::kg::ParsePredicateError,
    },
    #[error("line {line}: invalid max-gap `{value}`")]
    MaxGap { line: usize, value: String },
    #[error("line {line}: template must contain {{1}} and {{2}} exactly once and at least one word")]
    Template { line: usize },
}

impl RelationPattern {
    pub fn new(id: &str, predicate: Predicate, template: &str, max_gap: usize) -> Option<Self> {
        let trigger = parse_template(template)?;
        Some(Self {
            id: id.to_string(),
            predicate,
            trigger,
            max_gap,
        })
    }

    pub fn template(&self) -> String {
        self.trigger
            .iter()
            .map(|e| match e {
                TemplateElement::Subject => "{1}".to_string(),
                TemplateElement::Object => "{2}".to_string(),
                TemplateElement::Word(w) => w.clone(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn parse_template(template: &str) -> Option<Vec<TemplateElement>> {
    let mut out = Vec::new();
    for part in template.split_whitespace() {
        match part {
            "{1}" => out.push(TemplateElement::Subject),
            "{2}" => out.push(TemplateElement::Object),
            word => out.extend(tokenize(word).into_iter().map(|t| TemplateElement::Word(t.folded))),
        }
    }
    let subjects = out.iter().filter(|e| **e == TemplateElement::Subject).count();
    let objects = out.iter().filter(|e| **e == TemplateElement::Object).count();
    let words = out.len() - subjects - objects;
    (subjects == 1 && objects == 1 && words > 0).then_some(out)
}

pub fn parse_patterns(input: &str) -> Result<Vec<RelationPattern>, PatternError> {
    let mut patterns: Vec<RelationPattern> = Vec::new();
    for (idx, raw) in input.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.trim_end_matches('\r').split('\t').collect();
        if fields.len() != 4 {
            return Err(PatternError::FieldCount { line, found: fields.len() });
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(PatternError::EmptyId { line });
        }
        if patterns.iter().any(|p| p.id == id) {
            return Err(PatternError::DuplicateId { line, id: id.to_string() });
        }
        let predicate = fields[1]
            .trim()
            .parse()
            .map_err(|source| PatternError::Predicate { line, source })?;
        let max_gap = fields[3].trim().parse().map_err(|_| PatternError::MaxGap {
            line,
            value: fields[3].to_string(),
        })?;
        let pattern = RelationPattern::new(id, predicate, fields[2], max_gap)
            .ok_or(PatternError::Template { line })?;
        patterns.push(pattern);
    }
    Ok(patterns)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub folded: String,
    pub start: usize,
    pub end: usize,
    pub sentence: usize,
}

/// Alphanumeric runs with byte offsets. A `.`, `!` or `?` followed by
/// whitespace (or the end of text) closes a sentence.
pub(crate) fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    let mut sentence = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Token { folded: fold(&text[s..i]), start: s, end: i, sentence });
                start = None;
            }
            _ => {}
        }
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|(_, n)| n.is_whitespace()) {
            sentence += 1;
        }
    }
    if let Some(s) = start {
        out.push(Token { folded: fold(&text[s..]), start: s, end: text.len(), sentence });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTriple {
    pub subject: String,
    pub predicate: Predicate,
    pub object: String,
    pub confidence: f64,
    pub provenance: Provenance,
}

/// Extractor output for one chunk. Augmenter responses share this shape.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtractionCandidate {
    pub mentions: Vec<EntityMention>,
    pub triples: Vec<CandidateTriple>,
}

/// Emits one triple per (pattern, subject mention, object mention) whose
/// trigger sequence is satisfied. Output order: pattern id, then subject
/// offset, then object offset.
pub fn extract_relations(
    chunk: &Chunk,
    mentions: &[EntityMention],
    patterns: &[RelationPattern],
) -> Vec<CandidateTriple> {
    if mentions.len() < 2 {
        return Vec::new();
    }
    let tokens = tokenize(&chunk.text);
    // token span [first, last] covered by each mention
    let spans: Vec<Option<(usize, usize)>> = mentions
        .iter()
        .map(|m| {
            let first = tokens.iter().position(|t| t.start >= m.range.0 && t.end <= m.range.1)?;
            let last = tokens.iter().rposition(|t| t.start >= m.range.0 && t.end <= m.range.1)?;
            Some((first, last))
        })
        .collect();

    let mut ordered: Vec<&RelationPattern> = patterns.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));

    let mut out = Vec::new();
    for pattern in ordered {
        for (si, subject) in mentions.iter().enumerate() {
            let Some(sspan) = spans[si] else { continue };
            for (oi, object) in mentions.iter().enumerate() {
                if si == oi || canonical_id(&subject.label) == canonical_id(&object.label) {
                    continue;
                }
                let Some(ospan) = spans[oi] else { continue };
                let same_sentence = tokens[sspan.0].sentence == tokens[ospan.0].sentence;
                if same_sentence && matches_from(&pattern.trigger, pattern.max_gap, &tokens, sspan, ospan, None) {
                    out.push(CandidateTriple {
                        subject: subject.label.clone(),
                        predicate: pattern.predicate.clone(),
                        object: object.label.clone(),
                        confidence: 1.0,
                        provenance: Provenance::LexiconExtractor,
                    });
                }
            }
        }
    }
    out
}

/// Backtracking search: can `elements` be laid out left to right starting at
/// token `cursor` (the index after the previous element), honoring `max_gap`?
fn matches_from(
    elements: &[TemplateElement],
    max_gap: usize,
    tokens: &[Token],
    subject: (usize, usize),
    object: (usize, usize),
    cursor: Option<usize>,
) -> bool {
    let Some((head, rest)) = elements.split_first() else {
        return true;
    };
    let fits = |start: usize| match cursor {
        None => true,
        Some(c) => start >= c && start - c <= max_gap,
    };
    match head {
        TemplateElement::Subject | TemplateElement::Object => {
            let (first, last) = if *head == TemplateElement::Subject { subject } else { object };
            fits(first) && matches_from(rest, max_gap, tokens, subject, object, Some(last + 1))
        }
        TemplateElement::Word(w) => {
            let lo = cursor.unwrap_or(0);
            let hi = match cursor {
                None => tokens.len(),
                Some(c) => (c + max_gap + 1).min(tokens.len()),
            };
            (lo..hi).any(|t| {
                tokens[t].folded == *w
                    && tokens[t].sentence == tokens[subject.0].sentence
                    && !within(t, subject)
                    && !within(t, object)
                    && matches_from(rest, max_gap, tokens, subject, object, Some(t + 1))
            })
        }
    }
}

fn within(t: usize, span: (usize, usize)) -> bool {
    t >= span.0 && t <= span.1
}
