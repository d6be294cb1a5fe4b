//! Hierarchical GP -> consultant diagnosis.
//!
//! The GP agent ranks every disease in the graph. It keeps the case when its
//! top confidence reaches `tau` and the diagnosis is outside the specialist
//! set; otherwise the query is transferred to one consultant (a single target
//! specialty) or to all of them, in which case their rankings are fused by a
//! weighted or uniform sum.

mod aggregate;
mod engine;
mod referral;
mod remote;
mod scoring;
mod transfer;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate, aggregate_uniform, fuse_uniform, fuse_weighted, WEIGHT_SUM_TOLERANCE};
pub use engine::{
    diagnose, score_agent, update_gp_knowledge, AgentResult, DiagnosisEngine, DiagnosisOutcome, OutcomeKind,
    TraceEvent,
};
pub use referral::{decide_referral, in_specialist_set, ReferralDecision, ReferralReason};
pub use remote::{parse_scorer_response, RemoteScorer, ScorerResponse};
pub use scoring::{
    kg_confidence, rank_order, sort_ranking, DiagnosticFunction, KgOverlapScorer, ScoreRequest,
    ScoredDiagnosis,
};
pub use transfer::{transfer, Hop, TransferEnvelope};

use crate::ingestion::{EntityMatcher, Lexicon};
use crate::kg::{Category, EntityId, KnowledgeGraph, Specialty, Status};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosisError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("`{0}` is not a disease")]
    NotADisease(EntityId),
    #[error("scorer unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("scorer protocol error: {0}")]
    ScorerProtocol(String),
    #[error("weights sum to {0}, expected 1")]
    WeightSumViolation(f64),
    #[error("{weights} weights for {results} result lists")]
    WeightCountMismatch { weights: usize, results: usize },
    #[error("no results to aggregate")]
    EmptyResults,
    #[error("invalid roster: {0}")]
    InvalidRoster(String),
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),
    #[error("the graph holds no diseases")]
    NoDiseases,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticQuery {
    pub query_id: String,
    pub raw_text: String,
    pub symptom_ids: BTreeSet<EntityId>,
    #[serde(default)]
    pub context: BTreeMap<String, String>,
}

impl DiagnosticQuery {
    pub fn from_symptoms<I, S>(query_id: &str, symptoms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            query_id: query_id.to_string(),
            raw_text: String::new(),
            symptom_ids: symptoms.into_iter().map(Into::into).collect(),
            context: BTreeMap::new(),
        }
    }

    /// Recognizes symptoms in free text. Surface forms come from `lexicon` and
    /// from the graph's own symptom labels and aliases; only mentions that
    /// resolve to a symptom entity are kept.
    pub fn from_text(query_id: &str, raw_text: &str, lexicon: &Lexicon, graph: &KnowledgeGraph) -> Self {
        let mut combined = lexicon.clone();
        for e in graph.entities_of(Category::Symptom) {
            for surface in std::iter::once(&e.label).chain(&e.aliases) {
                combined.insert(surface, &e.label, e.category, e.specialty);
            }
        }
        let symptom_ids = EntityMatcher::new(&combined)
            .find(raw_text)
            .into_iter()
            .filter_map(|m| graph.resolve(&m.label).or_else(|| graph.resolve(&m.surface)).cloned())
            .filter(|id| graph.entity(id).is_some_and(|e| e.category == Category::Symptom))
            .collect();
        Self {
            query_id: query_id.to_string(),
            raw_text: raw_text.to_string(),
            symptom_ids,
            context: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    Gp,
    Consultant,
}

#[derive(Debug, Clone)]
pub struct AgentProfile {
    pub agent_id: String,
    pub tier: Tier,
    pub specialty: Specialty,
    pub weight: f64,
    pub scorer: Arc<dyn DiagnosticFunction>,
}

impl AgentProfile {
    pub fn gp() -> Self {
        Self {
            agent_id: "gp".into(),
            tier: Tier::Gp,
            specialty: Specialty::General,
            weight: 0.0,
            scorer: Arc::new(KgOverlapScorer),
        }
    }

    pub fn consultant(specialty: Specialty, weight: f64) -> Self {
        let name = serde_json::to_value(specialty)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        Self {
            agent_id: name,
            tier: Tier::Consultant,
            specialty,
            weight,
            scorer: Arc::new(KgOverlapScorer),
        }
    }

    pub fn with_scorer(mut self, scorer: Arc<dyn DiagnosticFunction>) -> Self {
        self.scorer = scorer;
        self
    }

    /// Disease domain this agent scores; `None` for the GP.
    pub fn domain(&self) -> Option<Specialty> {
        match self.tier {
            Tier::Gp => None,
            Tier::Consultant => Some(self.specialty),
        }
    }
}

/// One GP plus at least one consultant.
#[derive(Debug, Clone)]
pub struct Roster {
    agents: Vec<AgentProfile>,
}

impl Roster {
    pub fn new(agents: Vec<AgentProfile>) -> Result<Self, DiagnosisError> {
        let gps = agents.iter().filter(|a| a.tier == Tier::Gp).count();
        if gps != 1 {
            return Err(DiagnosisError::InvalidRoster(format!("expected one gp agent, found {gps}")));
        }
        if !agents.iter().any(|a| a.tier == Tier::Consultant) {
            return Err(DiagnosisError::InvalidRoster("no consultant agents".into()));
        }
        let mut ids = BTreeSet::new();
        for a in &agents {
            if !ids.insert(a.agent_id.as_str()) {
                return Err(DiagnosisError::InvalidRoster(format!("duplicate agent id `{}`", a.agent_id)));
            }
            if !(0.0..=1.0).contains(&a.weight) {
                return Err(DiagnosisError::InvalidRoster(format!("weight of `{}` outside [0, 1]", a.agent_id)));
            }
        }
        Ok(Self { agents })
    }

    /// GP plus cardiology, neurology, endocrinology and rheumatology
    /// consultants with equal weights.
    pub fn standard() -> Self {
        let mut agents = vec![AgentProfile::gp()];
        let w = 1.0 / Specialty::CONSULTANT_DOMAINS.len() as f64;
        agents.extend(Specialty::CONSULTANT_DOMAINS.iter().map(|&s| AgentProfile::consultant(s, w)));
        Self { agents }
    }

    pub fn gp(&self) -> &AgentProfile {
        self.agents.iter().find(|a| a.tier == Tier::Gp).expect("validated roster has a gp")
    }

    pub fn consultants(&self) -> impl Iterator<Item = &AgentProfile> {
        self.agents.iter().filter(|a| a.tier == Tier::Consultant)
    }

    pub fn consultant_for(&self, specialty: Specialty) -> Option<&AgentProfile> {
        self.consultants().find(|a| a.specialty == specialty)
    }

    pub fn agents(&self) -> &[AgentProfile] {
        &self.agents
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecialistRule {
    ExplicitList,
    SpecialtyNotGeneral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationMode {
    Weighted,
    Uniform,
}

/// Referral threshold applied to the GP's top confidence.
pub const DEFAULT_TAU: f64 = 0.7;
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub tau: f64,
    pub top_k: usize,
    pub specialist_rule: SpecialistRule,
    pub specialist_ids: BTreeSet<EntityId>,
    pub aggregation: AggregationMode,
    /// Edge statuses the scorers trust.
    pub scoring_statuses: Vec<Status>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            top_k: DEFAULT_TOP_K,
            specialist_rule: SpecialistRule::SpecialtyNotGeneral,
            specialist_ids: BTreeSet::new(),
            aggregation: AggregationMode::Uniform,
            scoring_statuses: Status::LIVE.to_vec(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), DiagnosisError> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(DiagnosisError::InvalidConfig(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.top_k == 0 {
            return Err(DiagnosisError::InvalidConfig("top_k must be at least 1".into()));
        }
        Ok(())
    }
}
