use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub source: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            source: String::new(),
        }
    }
}

/// A contiguous slice of a document. `range` holds byte offsets into the
/// document text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    pub range: (usize, usize),
}

impl Chunk {
    /// A standalone chunk covering `text`, for extraction outside a corpus.
    pub fn standalone(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let id = id.into();
        Chunk {
            range: (0, text.len()),
            doc_id: id.clone(),
            id,
            ordinal: 0,
            text,
        }
    }
}

pub fn chunk_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}#{ordinal}")
}

/// Splits a document into lossless chunks of at most `max_chunk_chars`
/// characters. Each split lands on the last paragraph break inside the budget,
/// else the last sentence end, else the last whitespace, else a hard cut.
pub fn segment_document(doc: &Document, max_chunk_chars: usize) -> Result<Vec<Chunk>, IngestError> {
    if doc.text.is_empty() {
        return Err(IngestError::EmptyDocument(doc.id.clone()));
    }
    if max_chunk_chars == 0 {
        return Err(IngestError::InvalidChunkBudget);
    }
    let text = doc.text.as_str();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < text.len() {
        let end = match text[start..].char_indices().nth(max_chunk_chars) {
            None => text.len(),
            Some((off, _)) => {
                let limit = start + off;
                split_point(text, start, limit).unwrap_or(limit)
            }
        };
        let ordinal = chunks.len();
        chunks.push(Chunk {
            id: chunk_id(&doc.id, ordinal),
            doc_id: doc.id.clone(),
            ordinal,
            text: text[start..end].to_string(),
            range: (start, end),
        });
        start = end;
    }
    Ok(chunks)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Boundary {
    Whitespace,
    Sentence,
    Paragraph,
}

/// Best split offset in `(start, limit]`, or `None` for a hard cut.
fn split_point(text: &str, start: usize, limit: usize) -> Option<usize> {
    let mut best: [Option<usize>; 3] = [None; 3];
    // offsets are visited in increasing order, so the last write wins
    for (off, c) in text[start..limit].char_indices().skip(1) {
        let pos = start + off;
        if c.is_whitespace() {
            continue;
        }
        if let Some(kind) = boundary_before(text, start, pos) {
            for k in [Boundary::Whitespace, Boundary::Sentence, Boundary::Paragraph] {
                if k <= kind {
                    best[k as usize] = Some(pos);
                }
            }
        }
    }
    // the limit itself can be a boundary when the next char starts a word
    if text[limit..].chars().next().is_some_and(|c| !c.is_whitespace()) {
        if let Some(kind) = boundary_before(text, start, limit) {
            for k in [Boundary::Whitespace, Boundary::Sentence, Boundary::Paragraph] {
                if k <= kind {
                    best[k as usize] = Some(limit);
                }
            }
        }
    }
    best[Boundary::Paragraph as usize]
        .or(best[Boundary::Sentence as usize])
        .or(best[Boundary::Whitespace as usize])
}

/// Classifies the whitespace run that ends right before `pos` (where `pos`
/// starts a non-whitespace char). Only text after `start` is considered.
fn boundary_before(text: &str, start: usize, pos: usize) -> Option<Boundary> {
    let before = &text[start..pos];
    let stripped = before.trim_end();
    if stripped.len() == before.len() || stripped.is_empty() {
        return None;
    }
    let gap = &before[stripped.len()..];
    if gap.matches('\n').count() >= 2 {
        return Some(Boundary::Paragraph);
    }
    if stripped.ends_with(['.', '!', '?']) {
        return Some(Boundary::Sentence);
    }
    Some(Boundary::Whitespace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(chunks: &[Chunk]) -> Vec<&str> {
        chunks.iter().map(|c| c.text.as_str()).collect()
    }

    #[test]
    fn short_text_is_one_chunk() {
        let doc = Document::new("d", "a".repeat(50));
        let chunks = segment_document(&doc, 200).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].range, (0, 50));
        assert_eq!(chunks[0].id, "d#0");
    }

    #[test]
    fn splits_at_paragraph_boundary() {
        let para = |c: char| {
            let mut s = String::new();
            while s.len() < 120 {
                s.push_str(&format!("{c}{c}{c}. "));
            }
            s.truncate(119);
            s.push('.');
            s
        };
        let text = format!("{}\n\n{}", para('a'), para('b'));
        let doc = Document::new("d", text.clone());
        let chunks = segment_document(&doc, 150).unwrap();
        // oracle: the only blank-line boundary inside the first window
        let blank = text.find("\n\n").unwrap() + 2;
        assert!(blank <= 150);
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].range, (0, blank));
        assert_eq!(chunks[1].text, para('b'));
    }

    #[test]
    fn sentence_preferred_over_whitespace() {
        let doc = Document::new("d", "One two. Three four five six");
        let chunks = segment_document(&doc, 20).unwrap();
        assert_eq!(texts(&chunks), vec!["One two. ", "Three four five six"]);
    }

    #[test]
    fn whitespace_when_no_sentence() {
        let doc = Document::new("d", "alpha beta gamma delta");
        let chunks = segment_document(&doc, 12).unwrap();
        assert_eq!(texts(&chunks), vec!["alpha beta ", "gamma delta"]);
    }

    #[test]
    fn unsplittable_token_is_hard_cut() {
        let token = "x".repeat(300);
        let doc = Document::new("d", token.clone());
        let chunks = segment_document(&doc, 100).unwrap();
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks.concat_text(), token);
        assert!(chunks.iter().all(|c| c.text.len() == 100));
    }

    #[test]
    fn multibyte_budget_counts_chars() {
        let doc = Document::new("d", "é".repeat(10));
        let chunks = segment_document(&doc, 4).unwrap();
        assert_eq!(chunks.iter().map(|c| c.text.chars().count()).collect::<Vec<_>>(), vec![4, 4, 2]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            segment_document(&Document::new("d", ""), 10),
            Err(IngestError::EmptyDocument(_))
        ));
        assert!(matches!(
            segment_document(&Document::new("d", "x"), 0),
            Err(IngestError::InvalidChunkBudget)
        ));
    }

    trait ConcatText {
        fn concat_text(&self) -> String;
    }

    impl ConcatText for Vec<Chunk> {
        fn concat_text(&self) -> String {
            self.iter().map(|c| c.text.as_str()).collect()
        }
    }
}
