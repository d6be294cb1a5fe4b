use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Canonical entity id (lowercase, kebab-case).
pub type EntityId = String;

/// Opaque relation id, unique within a graph.
pub type RelationId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Disease,
    Symptom,
    Drug,
    Procedure,
    RiskFactor,
    Category,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Specialty {
    General,
    Cardiology,
    Neurology,
    Endocrinology,
    Rheumatology,
}

impl Specialty {
    pub const CONSULTANT_DOMAINS: [Specialty; 4] = [
        Specialty::Cardiology,
        Specialty::Neurology,
        Specialty::Endocrinology,
        Specialty::Rheumatology,
    ];
}

/// Relation label. The closed vocabulary covers the edge kinds seen in medical
/// graphs; anything else is carried as `Other(tag)` and written `other:<tag>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    HasSymptom,
    Treats,
    Causes,
    ComorbidWith,
    ReducesRiskOf,
    BelongsTo,
    ContraindicatedWith,
    Other(String),
}

impl Predicate {
    pub fn as_str(&self) -> std::borrow::Cow<'_, str> {
        use std::borrow::Cow;
        match self {
            Predicate::HasSymptom => Cow::Borrowed("has-symptom"),
            Predicate::Treats => Cow::Borrowed("treats"),
            Predicate::Causes => Cow::Borrowed("causes"),
            Predicate::ComorbidWith => Cow::Borrowed("comorbid-with"),
            Predicate::ReducesRiskOf => Cow::Borrowed("reduces-risk-of"),
            Predicate::BelongsTo => Cow::Borrowed("belongs-to"),
            Predicate::ContraindicatedWith => Cow::Borrowed("contraindicated-with"),
            Predicate::Other(tag) => Cow::Owned(format!("other:{tag}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown predicate `{0}`")]
pub struct ParsePredicateError(pub String);

impl FromStr for Predicate {
    type Err = ParsePredicateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "has-symptom" => Predicate::HasSymptom,
            "treats" => Predicate::Treats,
            "causes" => Predicate::Causes,
            "comorbid-with" => Predicate::ComorbidWith,
            "reduces-risk-of" => Predicate::ReducesRiskOf,
            "belongs-to" => Predicate::BelongsTo,
            "contraindicated-with" => Predicate::ContraindicatedWith,
            other => match other.strip_prefix("other:") {
                Some(tag) if is_tag(tag) => Predicate::Other(tag.to_string()),
                _ => return Err(ParsePredicateError(s.to_string())),
            },
        })
    }
}

fn is_tag(tag: &str) -> bool {
    !tag.is_empty()
        && tag
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str())
    }
}

impl Serialize for Predicate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.as_str())
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    LexiconExtractor,
    Augmenter,
    Expert,
    Seed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Extracted,
    PendingReview,
    Approved,
    Rejected,
}

impl Status {
    /// Statuses that still count as graph content (everything but tombstones).
    pub const LIVE: [Status; 3] = [Status::Extracted, Status::PendingReview, Status::Approved];

    /// Statuses trusted for diagnostic scoring. Pending-review edges stay
    /// quarantined until an expert approves them.
    pub const TRUSTED: [Status; 2] = [Status::Extracted, Status::Approved];

    pub fn is_live(self) -> bool {
        self != Status::Rejected
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Status::Approved | Status::Rejected)
    }

    /// Legal single-step successors along extracted -> pending-review -> {approved, rejected}.
    pub fn successors(self) -> &'static [Status] {
        match self {
            Status::Extracted => &[Status::PendingReview],
            Status::PendingReview => &[Status::Approved, Status::Rejected],
            Status::Approved | Status::Rejected => &[],
        }
    }

    /// Path of single steps leading from `self` to `target`, excluding `self`.
    /// `None` if `target` is unreachable; empty if they are equal.
    pub fn path_to(self, target: Status) -> Option<Vec<Status>> {
        if self == target {
            return Some(Vec::new());
        }
        for &next in self.successors() {
            if let Some(mut rest) = next.path_to(target) {
                rest.insert(0, next);
                return Some(rest);
            }
        }
        None
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Extracted => "extracted",
            Status::PendingReview => "pending-review",
            Status::Approved => "approved",
            Status::Rejected => "rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: EntityId,
    pub label: String,
    pub category: Category,
    pub specialty: Specialty,
    pub aliases: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationTriple {
    pub id: RelationId,
    pub subject: EntityId,
    pub predicate: Predicate,
    pub object: EntityId,
    pub provenance: Provenance,
    pub status: Status,
    #[serde(rename = "source-chunk")]
    pub source_chunk: Option<String>,
}

impl RelationTriple {
    pub fn key(&self) -> TripleKey {
        TripleKey {
            subject: self.subject.clone(),
            predicate: self.predicate.clone(),
            object: self.object.clone(),
        }
    }
}

/// The (subject, predicate, object) projection used for deduplication.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripleKey {
    pub subject: EntityId,
    pub predicate: Predicate,
    pub object: EntityId,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicate_strings_round_trip() {
        let all = [
            Predicate::HasSymptom,
            Predicate::Treats,
            Predicate::Causes,
            Predicate::ComorbidWith,
            Predicate::ReducesRiskOf,
            Predicate::BelongsTo,
            Predicate::ContraindicatedWith,
            Predicate::Other("aids-management-of".into()),
        ];
        for p in all {
            assert_eq!(p.as_str().parse::<Predicate>().unwrap(), p);
        }
        assert!("other:".parse::<Predicate>().is_err());
        assert!("other:Bad Tag".parse::<Predicate>().is_err());
        assert!("heals".parse::<Predicate>().is_err());
    }

    #[test]
    fn status_paths() {
        assert_eq!(
            Status::Extracted.path_to(Status::Approved),
            Some(vec![Status::PendingReview, Status::Approved])
        );
        assert_eq!(Status::Approved.path_to(Status::Rejected), None);
        assert_eq!(Status::Rejected.path_to(Status::PendingReview), None);
        assert_eq!(Status::PendingReview.path_to(Status::Extracted), None);
        assert_eq!(Status::Approved.path_to(Status::Approved), Some(vec![]));
    }

    #[test]
    fn enums_serialize_kebab() {
        assert_eq!(serde_json::to_string(&Category::RiskFactor).unwrap(), "\"risk-factor\"");
        assert_eq!(serde_json::to_string(&Status::PendingReview).unwrap(), "\"pending-review\"");
        assert_eq!(
            serde_json::to_string(&Provenance::LexiconExtractor).unwrap(),
            "\"lexicon-extractor\""
        );
    }
}
