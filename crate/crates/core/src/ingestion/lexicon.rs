//! Surface-form lexicon and its tab-separated file format:
//!
//! ```text
//! # surface<TAB>canonical-label<TAB>category<TAB>specialty
//! t2d<TAB>Type 2 Diabetes<TAB>disease<TAB>endocrinology
//! ```

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::kg::{canonical_id, Category, Specialty};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub label: String,
    pub category: Category,
    pub specialty: Specialty,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexiconError {
    #[error("line {line}: expected 4 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: empty surface form")]
    EmptySurface { line: usize },
    #[error("line {line}: label `{label}` has no canonical form")]
    EmptyLabel { line: usize, label: String },
    #[error("line {line}: unknown {field} `{value}`")]
    UnknownValue { line: usize, field: &'static str, value: String },
    #[error("line {line}: duplicate surface form `{surface}`")]
    DuplicateSurface { line: usize, surface: String },
}

/// Maps case-folded surface forms to entity descriptions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
}

/// Case folding applied to surface forms and matched text.
pub fn fold(s: &str) -> String {
    s.chars().flat_map(char::to_lowercase).collect()
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds an entry. Returns `false` if the folded surface is already present
    /// or the surface/label is unusable.
    pub fn insert(&mut self, surface: &str, label: &str, category: Category, specialty: Specialty) -> bool {
        let key = fold(surface.trim());
        if key.is_empty() || canonical_id(label).is_none() || self.entries.contains_key(&key) {
            return false;
        }
        self.entries.insert(
            key,
            LexiconEntry {
                label: label.trim().to_string(),
                category,
                specialty,
            },
        );
        true
    }

    pub fn get(&self, surface: &str) -> Option<&LexiconEntry> {
        self.entries.get(&fold(surface))
    }

    /// Entries keyed by folded surface, in surface order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &LexiconEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Entry whose canonical label matches `label`, if any.
    pub fn by_label(&self, label: &str) -> Option<&LexiconEntry> {
        let id = canonical_id(label)?;
        self.entries
            .values()
            .find(|e| canonical_id(&e.label).as_deref() == Some(id.as_str()))
    }

    pub fn parse(input: &str) -> Result<Self, LexiconError> {
        let mut lexicon = Lexicon::new();
        for (idx, raw) in input.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.trim_end_matches('\r').split('\t').collect();
            if fields.len() != 4 {
                return Err(LexiconError::FieldCount { line, found: fields.len() });
            }
            let surface = fields[0].trim();
            if surface.is_empty() {
                return Err(LexiconError::EmptySurface { line });
            }
            let label = fields[1].trim();
            if canonical_id(label).is_none() {
                return Err(LexiconError::EmptyLabel { line, label: label.to_string() });
            }
            let category = parse_enum::<Category>(fields[2], "category", line)?;
            let specialty = parse_enum::<Specialty>(fields[3], "specialty", line)?;
            if !lexicon.insert(surface, label, category, specialty) {
                return Err(LexiconError::DuplicateSurface {
                    line,
                    surface: surface.to_string(),
                });
            }
        }
        Ok(lexicon)
    }

    /// Serializes back into the file format, one line per entry.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (surface, e) in &self.entries {
            out.push_str(&format!(
                "{surface}\t{}\t{}\t{}\n",
                e.label,
                enum_str(&e.category),
                enum_str(&e.specialty)
            ));
        }
        out
    }
}

pub(crate) fn parse_enum<T: for<'de> Deserialize<'de>>(
    value: &str,
    field: &'static str,
    line: usize,
) -> Result<T, LexiconError> {
    let value = value.trim();
    serde_json::from_value(serde_json::Value::String(value.to_string())).map_err(|_| {
        LexiconError::UnknownValue {
            line,
            field,
            value: value.to_string(),
        }
    })
}

fn enum_str<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("unit enums serialize to strings"),
    }
}
