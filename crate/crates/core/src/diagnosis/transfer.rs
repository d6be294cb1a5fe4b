use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::scoring::ScoredDiagnosis;
use super::DiagnosticQuery;
use crate::kg::EntityId;

/// One handoff between agents. `seq` is a logical clock: the hop's position
/// in the envelope's trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub seq: usize,
    pub from: String,
    pub to: String,
}

/// A query in the form a consultant receives it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferEnvelope {
    pub query: DiagnosticQuery,
    pub symptom_ids: BTreeSet<EntityId>,
    pub gp_candidates: Vec<ScoredDiagnosis>,
    pub trace: Vec<Hop>,
}

impl TransferEnvelope {
    /// Appends a hop. The trace is append-only.
    pub fn relay(&mut self, from: &str, to: &str) {
        self.trace.push(Hop {
            seq: self.trace.len(),
            from: from.to_string(),
            to: to.to_string(),
        });
    }
}

/// Packages `query` and the GP's ranking for `to`, recording the first hop.
pub fn transfer(query: &DiagnosticQuery, gp_results: &[ScoredDiagnosis], from: &str, to: &str) -> TransferEnvelope {
    let mut envelope = TransferEnvelope {
        query: query.clone(),
        symptom_ids: query.symptom_ids.clone(),
        gp_candidates: gp_results.to_vec(),
        trace: Vec::new(),
    };
    envelope.relay(from, to);
    envelope
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query() -> DiagnosticQuery {
        DiagnosticQuery::from_symptoms("q1", ["fever", "rash"])
    }

    #[test]
    fn preserves_symptoms_and_candidates() {
        let gp: Vec<ScoredDiagnosis> = (0..5).map(|i| ScoredDiagnosis::new(format!("d{i}"), 1.0 - i as f64 / 10.0)).collect();
        let env = transfer(&query(), &gp, "gp", "rheumatology");
        assert_eq!(env.symptom_ids, query().symptom_ids);
        assert_eq!(env.query, query());
        assert_eq!(env.gp_candidates, gp);
    }

    #[test]
    fn successive_transfers_replay_in_order() {
        let mut env = transfer(&query(), &[], "gp", "cardiology");
        env.relay("cardiology", "neurology");
        let replay: Vec<(&str, &str)> = env.trace.iter().map(|h| (h.from.as_str(), h.to.as_str())).collect();
        assert_eq!(replay, vec![("gp", "cardiology"), ("cardiology", "neurology")]);
        assert_eq!(env.trace.iter().map(|h| h.seq).collect::<Vec<_>>(), vec![0, 1]);
    }
}
