//! Patient dialog as a state machine.
//!
//! ```text
//! intake -> clarifying* -> decided ----------------------> closed
//!                       \-> referred -> consulting -> final -> closed
//! ```
//!
//! The GP asks about the symptom that splits its current top candidates most
//! evenly (present in the most, but not all, of their symptom sets) until its
//! top confidence reaches `tau`, the question budget runs out, or nothing is
//! left to ask. The engine then decides or refers.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use kgtriage_core::diagnosis::{
    score_agent, DiagnosisEngine, DiagnosisError, DiagnosisOutcome, DiagnosticQuery, OutcomeKind,
    ScoredDiagnosis,
};
use kgtriage_core::ingestion::Lexicon;
use kgtriage_core::kg::{EntityId, KnowledgeGraph, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionState {
    Intake,
    Clarifying,
    Decided,
    Referred,
    Consulting,
    Final,
    Closed,
}

impl SessionState {
    pub fn can_move_to(self, next: SessionState) -> bool {
        use SessionState::*;
        matches!(
            (self, next),
            (Intake, Clarifying | Decided | Referred)
                | (Clarifying, Clarifying | Decided | Referred)
                | (Referred, Consulting)
                | (Consulting, Final)
                | (Decided | Final, Closed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Speaker {
    Patient,
    Gp,
    Consultant,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub ts: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub state: SessionState,
    pub query: DiagnosticQuery,
    pub transcript: Vec<Turn>,
    pub outcome: Option<DiagnosisOutcome>,
    pub asked_symptoms: BTreeSet<EntityId>,
    pub pending_question: Option<EntityId>,
    /// Every state the session has been in, oldest first.
    pub history: Vec<SessionState>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("session is {actual:?}, expected {expected:?}")]
    WrongState { expected: SessionState, actual: SessionState },
    #[error("`{0}` is not the pending question")]
    UnexpectedSymptom(String),
    #[error(transparent)]
    Diagnosis(#[from] DiagnosisError),
}

impl Session {
    fn move_to(&mut self, next: SessionState) {
        assert!(self.state.can_move_to(next), "illegal session transition {:?} -> {next:?}", self.state);
        self.state = next;
        self.history.push(next);
    }

    fn say(&mut self, speaker: Speaker, text: String, ts: DateTime<Utc>) {
        self.transcript.push(Turn { speaker, text, ts });
    }

    /// The question awaiting an answer.
    pub fn next_question(&self) -> Result<Option<&EntityId>, SessionError> {
        self.expect(SessionState::Clarifying)?;
        Ok(self.pending_question.as_ref())
    }

    fn expect(&self, expected: SessionState) -> Result<(), SessionError> {
        if self.state == expected {
            Ok(())
        } else {
            Err(SessionError::WrongState { expected, actual: self.state })
        }
    }
}

/// Symptom present in the largest number, but not all, of the candidates'
/// symptom sets, skipping `excluded`. Ties go to the smallest id.
pub fn discriminating_symptom(
    candidates: &[ScoredDiagnosis],
    excluded: &BTreeSet<EntityId>,
    graph: &KnowledgeGraph,
    statuses: &[Status],
) -> Option<EntityId> {
    let n = candidates.len();
    let mut counts: std::collections::BTreeMap<EntityId, usize> = Default::default();
    for c in candidates {
        for s in graph.symptoms_of(&c.diagnosis_id, statuses).unwrap_or_default() {
            *counts.entry(s).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .filter(|(s, c)| *c >= 1 && *c < n && !excluded.contains(s))
        .fold(None, |best: Option<(EntityId, usize)>, (s, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((s, c)),
        })
        .map(|(s, _)| s)
}

/// Everything a dialog step reads.
#[derive(Debug, Clone, Copy)]
pub struct Dialog<'a> {
    pub engine: &'a DiagnosisEngine,
    pub graph: &'a KnowledgeGraph,
    pub lexicon: &'a Lexicon,
    pub max_questions: usize,
}

impl Dialog<'_> {
    pub fn start(&self, session_id: &str, text: &str, ts: DateTime<Utc>) -> Result<Session, SessionError> {
        let mut session = Session {
            session_id: session_id.to_string(),
            state: SessionState::Intake,
            query: DiagnosticQuery::from_text(session_id, text, self.lexicon, self.graph),
            transcript: Vec::new(),
            outcome: None,
            asked_symptoms: BTreeSet::new(),
            pending_question: None,
            history: vec![SessionState::Intake],
        };
        session.say(Speaker::Patient, text.to_string(), ts);
        self.advance(&mut session, ts)?;
        Ok(session)
    }

    pub fn answer(&self, session: &mut Session, symptom: &str, present: bool, ts: DateTime<Utc>) -> Result<(), SessionError> {
        session.expect(SessionState::Clarifying)?;
        if session.pending_question.as_deref() != Some(symptom) {
            return Err(SessionError::UnexpectedSymptom(symptom.to_string()));
        }
        // score before mutating so a failing scorer leaves the session as it was
        let mut next = session.clone();
        next.pending_question = None;
        next.asked_symptoms.insert(symptom.to_string());
        if present {
            next.query.symptom_ids.insert(symptom.to_string());
        }
        next.say(Speaker::Patient, format!("{}: {}", self.label(symptom), if present { "yes" } else { "no" }), ts);
        self.advance(&mut next, ts)?;
        *session = next;
        Ok(())
    }

    pub fn close(&self, session: &mut Session, ts: DateTime<Utc>) -> Result<(), SessionError> {
        if !matches!(session.state, SessionState::Decided | SessionState::Final) {
            return Err(SessionError::WrongState { expected: SessionState::Final, actual: session.state });
        }
        session.move_to(SessionState::Closed);
        session.say(Speaker::System, "session closed".into(), ts);
        Ok(())
    }

    fn label(&self, id: &str) -> String {
        self.graph.entity(id).map_or_else(|| id.to_string(), |e| e.label.clone())
    }

    fn advance(&self, session: &mut Session, ts: DateTime<Utc>) -> Result<(), SessionError> {
        let config = self.engine.config();
        let ranking = score_agent(self.engine.roster().gp(), &session.query, config, self.graph)?;
        let confident = ranking.first().is_some_and(|top| top.confidence >= config.tau);
        let question = if confident || session.asked_symptoms.len() >= self.max_questions {
            None
        } else {
            let excluded = session.asked_symptoms.union(&session.query.symptom_ids).cloned().collect();
            discriminating_symptom(&ranking, &excluded, self.graph, &config.scoring_statuses)
        };
        if let Some(q) = question {
            session.move_to(SessionState::Clarifying);
            session.say(Speaker::Gp, format!("Do you have {}?", self.label(&q)), ts);
            session.pending_question = Some(q);
            return Ok(());
        }
        let outcome = self.engine.diagnose(&session.query, self.graph)?;
        let verdict = format!(
            "Diagnosis: {} (confidence {:.2})",
            self.label(&outcome.final_diagnosis.diagnosis_id),
            outcome.final_diagnosis.confidence
        );
        if outcome.kind == OutcomeKind::GpDirect {
            session.move_to(SessionState::Decided);
            session.say(Speaker::Gp, verdict, ts);
        } else {
            session.move_to(SessionState::Referred);
            let targets: Vec<String> = outcome
                .per_agent
                .iter()
                .map(|a| a.agent_id.clone())
                .collect();
            session.say(Speaker::Gp, format!("Referring to {}", targets.join(", ")), ts);
            session.move_to(SessionState::Consulting);
            session.move_to(SessionState::Final);
            session.say(Speaker::Consultant, verdict, ts);
            if outcome.low_confidence {
                session.say(Speaker::System, "consultants remain below the referral threshold".into(), ts);
            }
        }
        session.outcome = Some(outcome);
        Ok(())
    }
}
