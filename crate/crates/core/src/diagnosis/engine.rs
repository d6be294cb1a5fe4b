use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{fuse_uniform, fuse_weighted, WEIGHT_SUM_TOLERANCE};
use super::referral::{decide_referral, ReferralDecision};
use super::scoring::{ScoreRequest, ScoredDiagnosis};
use super::transfer::{transfer, TransferEnvelope};
use super::{AgentProfile, AggregationMode, DiagnosisError, DiagnosticQuery, EngineConfig, Roster};
use crate::curation::KnowledgeDelta;
use crate::kg::{Category, KgError, KnowledgeGraph, Specialty};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeKind {
    GpDirect,
    ConsultantSingle,
    ConsultantAggregated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResult {
    pub agent_id: String,
    pub specialty: Specialty,
    pub results: Vec<ScoredDiagnosis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    GpScored { top: Option<ScoredDiagnosis> },
    ReferralDecided { decision: ReferralDecision },
    Transferred { from: String, to: String },
    ConsultantScored { agent_id: String, top: Option<ScoredDiagnosis> },
    ConsultantFailed { agent_id: String, error: String },
    NoConsultantForSpecialty { specialty: Specialty },
    Aggregated { agents: Vec<String>, weights: Vec<f64> },
    NoConsultantResults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisOutcome {
    pub query_id: String,
    pub kind: OutcomeKind,
    #[serde(rename = "final")]
    pub final_diagnosis: ScoredDiagnosis,
    pub gp_results: Vec<ScoredDiagnosis>,
    pub per_agent: Vec<AgentResult>,
    pub decision: ReferralDecision,
    /// Referred, yet the final confidence is still below `tau`.
    pub low_confidence: bool,
    pub envelope: Option<TransferEnvelope>,
    pub trace: Vec<TraceEvent>,
}

/// One agent's ranking for `query`, restricted to its domain. Entries a
/// scorer returns outside that domain (possible with remote scorers) are
/// dropped.
pub fn score_agent(
    agent: &AgentProfile,
    query: &DiagnosticQuery,
    config: &EngineConfig,
    graph: &KnowledgeGraph,
) -> Result<Vec<ScoredDiagnosis>, DiagnosisError> {
    let request = ScoreRequest {
        query_id: &query.query_id,
        symptom_ids: &query.symptom_ids,
        domain: agent.domain(),
        top_k: config.top_k,
        statuses: &config.scoring_statuses,
    };
    let mut results = agent.scorer.score(&request, graph)?;
    if let Some(domain) = agent.domain() {
        results.retain(|r| {
            graph
                .entity(&r.diagnosis_id)
                .is_some_and(|e| e.category == Category::Disease && e.specialty == domain)
        });
    }
    Ok(results)
}

/// Runs the GP -> consultant protocol for one query.
pub fn diagnose(
    query: &DiagnosticQuery,
    config: &EngineConfig,
    roster: &Roster,
    graph: &KnowledgeGraph,
) -> Result<DiagnosisOutcome, DiagnosisError> {
    config.validate()?;
    if graph.entities_of(Category::Disease).next().is_none() {
        return Err(DiagnosisError::NoDiseases);
    }
    let gp = roster.gp();
    let gp_results = score_agent(gp, query, config, graph)?;
    let mut trace = vec![TraceEvent::GpScored { top: gp_results.first().cloned() }];
    let decision = decide_referral(&gp_results, config, graph);
    trace.push(TraceEvent::ReferralDecided { decision: decision.clone() });

    let gp_top = gp_results
        .first()
        .cloned()
        .ok_or(DiagnosisError::NoDiseases)?;
    let mut outcome = DiagnosisOutcome {
        query_id: query.query_id.clone(),
        kind: OutcomeKind::GpDirect,
        final_diagnosis: gp_top.clone(),
        gp_results,
        per_agent: Vec::new(),
        decision,
        low_confidence: false,
        envelope: None,
        trace,
    };
    if !outcome.decision.is_referral() {
        return Ok(outcome);
    }

    let targets = outcome.decision.target_specialties.clone();
    let mut consultants: Vec<&AgentProfile> = Vec::new();
    let mut missing = false;
    for specialty in &targets {
        match roster.consultant_for(*specialty) {
            Some(agent) => consultants.push(agent),
            None => {
                missing = true;
                outcome.trace.push(TraceEvent::NoConsultantForSpecialty { specialty: *specialty });
            }
        }
    }
    if missing || consultants.is_empty() {
        consultants = roster.consultants().collect();
    }

    let mut envelope: Option<TransferEnvelope> = None;
    for agent in &consultants {
        match envelope.as_mut() {
            None => envelope = Some(transfer(query, &outcome.gp_results, &gp.agent_id, &agent.agent_id)),
            Some(env) => env.relay(&gp.agent_id, &agent.agent_id),
        }
        outcome.trace.push(TraceEvent::Transferred {
            from: gp.agent_id.clone(),
            to: agent.agent_id.clone(),
        });
    }
    outcome.envelope = envelope;

    let scored: Vec<(&AgentProfile, Result<Vec<ScoredDiagnosis>, DiagnosisError>)> = consultants
        .par_iter()
        .map(|agent| (*agent, score_agent(agent, query, config, graph)))
        .collect();
    let mut answered: Vec<&AgentProfile> = Vec::new();
    for (agent, result) in scored {
        match result {
            Ok(results) => {
                outcome.trace.push(TraceEvent::ConsultantScored {
                    agent_id: agent.agent_id.clone(),
                    top: results.first().cloned(),
                });
                outcome.per_agent.push(AgentResult {
                    agent_id: agent.agent_id.clone(),
                    specialty: agent.specialty,
                    results,
                });
                answered.push(agent);
            }
            Err(e) => outcome.trace.push(TraceEvent::ConsultantFailed {
                agent_id: agent.agent_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    if answered.is_empty() {
        return Err(DiagnosisError::ScorerUnavailable("every consultant failed".into()));
    }

    let single = targets.len() == 1 && !missing && answered.len() == 1;
    let fused = if single {
        outcome.kind = OutcomeKind::ConsultantSingle;
        Ok(outcome.per_agent[0].results.clone())
    } else {
        outcome.kind = OutcomeKind::ConsultantAggregated;
        let lists: Vec<Vec<ScoredDiagnosis>> = outcome.per_agent.iter().map(|a| a.results.clone()).collect();
        let weights = aggregation_weights(&answered, config.aggregation);
        outcome.trace.push(TraceEvent::Aggregated {
            agents: answered.iter().map(|a| a.agent_id.clone()).collect(),
            weights: weights.clone(),
        });
        match config.aggregation {
            AggregationMode::Uniform => fuse_uniform(&lists),
            AggregationMode::Weighted => fuse_weighted(&lists, &weights),
        }
    };
    match fused {
        Ok(ranking) if !ranking.is_empty() => {
            outcome.final_diagnosis = ranking[0].clone();
        }
        Ok(_) | Err(DiagnosisError::EmptyResults) => {
            outcome.trace.push(TraceEvent::NoConsultantResults);
            outcome.final_diagnosis = gp_top;
        }
        Err(e) => return Err(e),
    }
    outcome.low_confidence = outcome.final_diagnosis.confidence < config.tau;
    Ok(outcome)
}

/// Weights over the agents being aggregated. Uniform mode uses `1/n`.
/// Weighted mode uses the roster weights, rescaled to sum to one when the
/// aggregation set is a strict subset of the roster.
fn aggregation_weights(agents: &[&AgentProfile], mode: AggregationMode) -> Vec<f64> {
    let n = agents.len() as f64;
    match mode {
        AggregationMode::Uniform => vec![1.0 / n; agents.len()],
        AggregationMode::Weighted => {
            let raw: Vec<f64> = agents.iter().map(|a| a.weight).collect();
            let sum: f64 = raw.iter().sum();
            if (sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE {
                raw
            } else if sum > 0.0 {
                raw.iter().map(|w| w / sum).collect()
            } else {
                vec![1.0 / n; agents.len()]
            }
        }
    }
}

/// Engine bound to a configuration and roster; the graph is supplied per
/// call so callers control snapshotting.
#[derive(Debug, Clone)]
pub struct DiagnosisEngine {
    config: EngineConfig,
    roster: Roster,
}

impl DiagnosisEngine {
    pub fn new(config: EngineConfig, roster: Roster) -> Result<Self, DiagnosisError> {
        config.validate()?;
        Ok(Self { config, roster })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn diagnose(&self, query: &DiagnosticQuery, graph: &KnowledgeGraph) -> Result<DiagnosisOutcome, DiagnosisError> {
        diagnose(query, &self.config, &self.roster, graph)
    }
}

/// Adds a delta's approved triples to the graph the GP scores against.
pub fn update_gp_knowledge(gp_view: &mut KnowledgeGraph, delta: &KnowledgeDelta) -> Result<(), KgError> {
    gp_view.expand(&delta.entities, &delta.approved_triples)
}
