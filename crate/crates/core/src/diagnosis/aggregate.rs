use std::collections::BTreeSet;

use super::scoring::{sort_ranking, ScoredDiagnosis};
use super::DiagnosisError;

/// Tolerance on the weight sum.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Fused confidence per candidate: `Σ w_i · P_i(z)`, where an agent that did
/// not score `z` contributes zero. Returns the full ranking.
pub fn fuse_weighted(
    results: &[Vec<ScoredDiagnosis>],
    weights: &[f64],
) -> Result<Vec<ScoredDiagnosis>, DiagnosisError> {
    if results.is_empty() {
        return Err(DiagnosisError::EmptyResults);
    }
    if weights.len() != results.len() {
        return Err(DiagnosisError::WeightCountMismatch {
            weights: weights.len(),
            results: results.len(),
        });
    }
    if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(DiagnosisError::WeightSumViolation(weights.iter().sum()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(DiagnosisError::WeightSumViolation(sum));
    }
    fuse_with(results, |per_agent| {
        per_agent
            .iter()
            .zip(weights)
            .map(|(p, w)| w * p)
            .sum::<f64>()
    })
}

/// Uniform special case: the arithmetic mean of the agents' confidences.
pub fn fuse_uniform(results: &[Vec<ScoredDiagnosis>]) -> Result<Vec<ScoredDiagnosis>, DiagnosisError> {
    if results.is_empty() {
        return Err(DiagnosisError::EmptyResults);
    }
    let n = results.len() as f64;
    fuse_with(results, |per_agent| per_agent.iter().sum::<f64>() / n)
}

fn fuse_with(
    results: &[Vec<ScoredDiagnosis>],
    combine: impl Fn(&[f64]) -> f64,
) -> Result<Vec<ScoredDiagnosis>, DiagnosisError> {
    let candidates: BTreeSet<&str> = results
        .iter()
        .flatten()
        .map(|r| r.diagnosis_id.as_str())
        .collect();
    if candidates.is_empty() {
        return Err(DiagnosisError::EmptyResults);
    }
    let mut per_agent = vec![0.0; results.len()];
    let mut fused: Vec<ScoredDiagnosis> = candidates
        .into_iter()
        .map(|z| {
            for (slot, agent) in per_agent.iter_mut().zip(results) {
                *slot = agent
                    .iter()
                    .find(|r| r.diagnosis_id == z)
                    .map_or(0.0, |r| r.confidence);
            }
            ScoredDiagnosis::new(z, combine(&per_agent).clamp(0.0, 1.0))
        })
        .collect();
    sort_ranking(&mut fused);
    Ok(fused)
}

/// Weighted argmax, ties broken by lexicographic id.
pub fn aggregate(results: &[Vec<ScoredDiagnosis>], weights: &[f64]) -> Result<ScoredDiagnosis, DiagnosisError> {
    Ok(fuse_weighted(results, weights)?.swap_remove(0))
}

/// Uniform-weight argmax, ties broken by lexicographic id.
pub fn aggregate_uniform(results: &[Vec<ScoredDiagnosis>]) -> Result<ScoredDiagnosis, DiagnosisError> {
    Ok(fuse_uniform(results)?.swap_remove(0))
}
