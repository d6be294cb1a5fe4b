use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::lexicon::{Lexicon, LexiconEntry};
use super::Chunk;
use crate::kg::{Category, Specialty};

/// A lexicon hit inside a chunk. `range` is in bytes, relative to the chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    pub label: String,
    pub category: Category,
    pub specialty: Specialty,
    pub range: (usize, usize),
}

/// Longest-leftmost dictionary matcher over case-folded text.
pub struct EntityMatcher<'a> {
    // first folded char -> surfaces, longest first
    by_first: HashMap<char, Vec<(Vec<char>, &'a LexiconEntry)>>,
}

impl<'a> EntityMatcher<'a> {
    pub fn new(lexicon: &'a Lexicon) -> Self {
        let mut by_first: HashMap<char, Vec<(Vec<char>, &LexiconEntry)>> = HashMap::new();
        for (surface, entry) in lexicon.iter() {
            let chars: Vec<char> = surface.chars().collect();
            if let Some(&first) = chars.first() {
                by_first.entry(first).or_default().push((chars, entry));
            }
        }
        for list in by_first.values_mut() {
            list.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        }
        Self { by_first }
    }

    /// All longest, leftmost, non-overlapping matches on word boundaries,
    /// ordered by offset.
    pub fn find(&self, text: &str) -> Vec<EntityMention> {
        let mut out = Vec::new();
        let mut prev: Option<char> = None;
        let mut resume = 0;
        for (pos, c) in text.char_indices() {
            let at_boundary = !prev.is_some_and(char::is_alphanumeric);
            prev = Some(c);
            if pos < resume || !at_boundary {
                continue;
            }
            let Some(first) = c.to_lowercase().next() else { continue };
            let Some(candidates) = self.by_first.get(&first) else { continue };
            // longest first, so the first hit is the longest at this start
            let hit = candidates
                .iter()
                .find_map(|(surface, entry)| match_at(text, pos, surface).map(|end| (end, *entry)));
            if let Some((end, entry)) = hit {
                out.push(EntityMention {
                    surface: text[pos..end].to_string(),
                    label: entry.label.clone(),
                    category: entry.category,
                    specialty: entry.specialty,
                    range: (pos, end),
                });
                resume = end;
            }
        }
        out
    }
}

/// Byte end of `surface` matched case-insensitively at `start`, if the match
/// ends on a word boundary.
fn match_at(text: &str, start: usize, surface: &[char]) -> Option<usize> {
    let mut want = surface.iter();
    let mut iter = text[start..].char_indices();
    let mut end = start;
    loop {
        if want.as_slice().is_empty() {
            break;
        }
        let (off, c) = iter.next()?;
        for folded in c.to_lowercase() {
            if want.next() != Some(&folded) {
                return None;
            }
        }
        end = start + off + c.len_utf8();
    }
    let next = text[end..].chars().next();
    if next.is_some_and(char::is_alphanumeric) {
        return None;
    }
    Some(end)
}

pub fn extract_entities(chunk: &Chunk, lexicon: &Lexicon) -> Vec<EntityMention> {
    EntityMatcher::new(lexicon).find(&chunk.text)
}
