//! Choosing the next test skill by expected information gain.

use std::collections::BTreeSet;

use super::blame::entropy;
use super::{BlameDistribution, DiagnosisConfig, DiagnosisError, NO_FAULT};

/// A test skill and the functions its call tree may enter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub skill: String,
    pub coverage: BTreeSet<String>,
}

/// Entropy of `blame` minus the expected entropy after observing the
/// outcome of `candidate`, under the coverage outcome model.
pub fn expected_information_gain(blame: &BlameDistribution, candidate: &Candidate, config: &DiagnosisConfig) -> f64 {
    let fail: Vec<f64> = blame
        .hypotheses
        .iter()
        .map(|h| {
            if h != NO_FAULT && candidate.coverage.contains(h) {
                config.rho
            } else {
                config.rho_0
            }
        })
        .collect();
    let mut expected = 0.0;
    for failed in [true, false] {
        let joint: Vec<f64> = blame
            .probabilities
            .iter()
            .zip(&fail)
            .map(|(p, f)| p * if failed { *f } else { 1.0 - f })
            .collect();
        let outcome: f64 = joint.iter().sum();
        if outcome > 0.0 {
            let posterior: Vec<f64> = joint.iter().map(|j| j / outcome).collect();
            expected += outcome * entropy(&posterior);
        }
    }
    blame.entropy() - expected
}

/// The candidate with the largest expected gain; gains within 1e-12 count
/// as equal and the lexicographically smallest skill id wins.
pub fn select_next_skill(
    blame: &BlameDistribution,
    candidates: &[Candidate],
    config: &DiagnosisConfig,
) -> Result<String, DiagnosisError> {
    let mut sorted: Vec<&Candidate> = candidates.iter().collect();
    sorted.sort_by(|a, b| a.skill.cmp(&b.skill));
    let mut best: Option<(&Candidate, f64)> = None;
    for c in sorted {
        let gain = expected_information_gain(blame, c, config);
        match best {
            Some((_, g)) if gain <= g + 1e-12 => {}
            _ => best = Some((c, gain)),
        }
    }
    best.map(|(c, _)| c.skill.clone()).ok_or(DiagnosisError::NoCandidates)
}
