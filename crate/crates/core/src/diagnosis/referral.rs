use serde::{Deserialize, Serialize};

use super::scoring::ScoredDiagnosis;
use super::{EngineConfig, SpecialistRule};
use crate::kg::{KnowledgeGraph, Specialty};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferralReason {
    BelowThreshold,
    SpecialistDiagnosis,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferralDecision {
    /// Escalation indicator: 1 refers the query to consultants, 0 keeps it.
    pub referral: u8,
    pub reason: ReferralReason,
    pub target_specialties: Vec<Specialty>,
}

impl ReferralDecision {
    pub fn is_referral(&self) -> bool {
        self.referral == 1
    }
}

/// Membership in the specialist set under the configured rule.
pub fn in_specialist_set(diagnosis_id: &str, config: &EngineConfig, graph: &KnowledgeGraph) -> bool {
    match config.specialist_rule {
        SpecialistRule::ExplicitList => config.specialist_ids.contains(diagnosis_id),
        SpecialistRule::SpecialtyNotGeneral => graph
            .entity(diagnosis_id)
            .is_some_and(|e| e.specialty != Specialty::General),
    }
}

fn specialty_of(id: &str, graph: &KnowledgeGraph) -> Specialty {
    graph.entity(id).map_or(Specialty::General, |e| e.specialty)
}

/// Referral when the GP's top confidence is below `tau` or the top diagnosis
/// is in the specialist set.
///
/// Targets: the top diagnosis's specialty for specialist referrals. For
/// below-threshold referrals, the single specialty shared by every GP
/// candidate with nonzero confidence, if there is one and it is not
/// `general`; otherwise every consultant domain.
pub fn decide_referral(gp_ranking: &[ScoredDiagnosis], config: &EngineConfig, graph: &KnowledgeGraph) -> ReferralDecision {
    let Some(top) = gp_ranking.first() else {
        return ReferralDecision {
            referral: 1,
            reason: ReferralReason::BelowThreshold,
            target_specialties: Specialty::CONSULTANT_DOMAINS.to_vec(),
        };
    };
    if top.confidence < config.tau {
        let mut contending: Vec<Specialty> = gp_ranking
            .iter()
            .filter(|r| r.confidence > 0.0)
            .map(|r| specialty_of(&r.diagnosis_id, graph))
            .collect();
        contending.sort();
        contending.dedup();
        let target_specialties = match contending.as_slice() {
            [only] if *only != Specialty::General => vec![*only],
            _ => Specialty::CONSULTANT_DOMAINS.to_vec(),
        };
        return ReferralDecision {
            referral: 1,
            reason: ReferralReason::BelowThreshold,
            target_specialties,
        };
    }
    if in_specialist_set(&top.diagnosis_id, config, graph) {
        return ReferralDecision {
            referral: 1,
            reason: ReferralReason::SpecialistDiagnosis,
            target_specialties: vec![specialty_of(&top.diagnosis_id, graph)],
        };
    }
    ReferralDecision {
        referral: 0,
        reason: ReferralReason::None,
        target_specialties: Vec::new(),
    }
}
