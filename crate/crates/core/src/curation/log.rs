//! Append-only review event log, one JSON object per line.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::CurationError;
use crate::kg::RelationTriple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReviewAction {
    Enqueue,
    Approve,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewEvent {
    pub ts: DateTime<Utc>,
    pub item_id: String,
    pub actor: String,
    pub action: ReviewAction,
    /// The triple as it stands after this event.
    pub triple: RelationTriple,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReviewEvent {
    /// Serialized record without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("review events always serialize")
    }
}

/// Parses a whole log. Blank lines are skipped; line numbers in errors are
/// 1-based.
pub fn parse_review_log(text: &str) -> Result<Vec<ReviewEvent>, CurationError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_review_line(l).map_err(|message| CurationError::Log { line: i + 1, message }))
        .collect()
}

fn parse_review_line(line: &str) -> Result<ReviewEvent, String> {
    let event: ReviewEvent = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if event.item_id.is_empty() {
        return Err("empty item_id".into());
    }
    Ok(event)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Predicate, Provenance, Status};

    fn event() -> ReviewEvent {
        ReviewEvent {
            ts: "2024-05-01T10:00:00Z".parse().unwrap(),
            item_id: "item-000001".into(),
            actor: "dr-lee".into(),
            action: ReviewAction::Approve,
            triple: RelationTriple {
                id: "rel-000004".into(),
                subject: "gout".into(),
                predicate: Predicate::HasSymptom,
                object: "joint-pain".into(),
                provenance: Provenance::Augmenter,
                status: Status::Approved,
                source_chunk: Some("doc#0".into()),
            },
            note: None,
        }
    }

    #[test]
    fn line_shape() {
        let line = event().to_line();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 5);
        for k in ["ts", "item_id", "actor", "action", "triple"] {
            assert!(keys.contains(&k));
        }
        assert_eq!(v["action"], "approve");
    }

    #[test]
    fn roundtrip_and_errors() {
        let text = format!("{}\n\n{}\n", event().to_line(), event().to_line());
        assert_eq!(parse_review_log(&text).unwrap(), vec![event(), event()]);
        let err = parse_review_log(&format!("{}\n{{bad\n", event().to_line())).unwrap_err();
        assert!(matches!(err, CurationError::Log { line: 2, .. }));
    }
}
