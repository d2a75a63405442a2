//! Skill-centric fault localization: success models learned from
//! experience, failure-time estimation, Bayesian blame over instrumented
//! functions and information-gain test selection.

mod blame;
mod models;
mod selection;
mod session;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::MemoryError;
use crate::skill::SkillError;
use crate::world::WorldError;

pub use blame::{likelihood, BlameDistribution, Observation};
pub use models::{FailTime, Fpf, Mom};
pub use selection::{expected_information_gain, select_next_skill, Candidate};
pub use session::{
    collect_training_records, diagnose, DiagnosisSession, DiagnosisStep, Diagnoser, SkillModel, Strategy,
};

/// Hypothesis that no instrumented function is faulty.
pub const NO_FAULT: &str = "no-fault";

#[derive(Debug, Error)]
pub enum DiagnosisError {
    #[error("{skill}: {found} successful records, at least {needed} are needed")]
    InsufficientRecords { skill: String, found: usize, needed: usize },
    #[error("sensor channels do not match the model of {0}")]
    ChannelMismatch(String),
    #[error("no trained model for skill {0:?}")]
    Untrained(String),
    #[error("no candidate skills to test")]
    NoCandidates,
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("invalid diagnosis configuration: {0}")]
    InvalidConfig(String),
    #[error("likelihood vector has {got} entries for {expected} hypotheses")]
    HypothesisMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// Likelihood and selection constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosisConfig {
    /// Likelihood of a failure under a function that never ran.
    pub epsilon_bg: f64,
    /// Likelihood of a success under a function that ran.
    pub beta_low: f64,
    /// Likelihood of a success under a function that did not run.
    pub beta_high: f64,
    /// Decay, in ticks, of blame with distance from the failure time.
    pub lambda_t: f64,
    /// Weight of the call-profile deviation.
    pub kappa: f64,
    /// Failure probability of a test covering the faulty function.
    pub rho: f64,
    /// Failure probability of a test not covering it.
    pub rho_0: f64,
    pub variance_floor: f64,
    /// Chi-square quantile of the failure-time threshold.
    pub tau_quantile: f64,
    /// Posterior mass at which a session stops early.
    pub certainty: f64,
    pub min_records: usize,
}

impl Default for DiagnosisConfig {
    fn default() -> Self {
        DiagnosisConfig {
            epsilon_bg: 0.01,
            beta_low: 0.1,
            beta_high: 0.9,
            lambda_t: 5.0,
            kappa: 1.0,
            rho: 0.9,
            rho_0: 0.05,
            variance_floor: 1e-3,
            tau_quantile: 0.999,
            certainty: 0.95,
            min_records: 10,
        }
    }
}

impl DiagnosisConfig {
    pub fn validate(&self) -> Result<(), DiagnosisError> {
        let bad = |m: &str| Err(DiagnosisError::InvalidConfig(m.to_string()));
        let prob = |p: f64| p > 0.0 && p < 1.0;
        if !(self.epsilon_bg > 0.0) {
            return bad("epsilon_bg must be positive");
        }
        if !(self.beta_low > 0.0 && self.beta_low < self.beta_high) {
            return bad("need 0 < beta_low < beta_high");
        }
        if !(self.lambda_t > 0.0 && self.kappa >= 0.0) {
            return bad("lambda_t must be positive and kappa non-negative");
        }
        if !(prob(self.rho) && prob(self.rho_0)) {
            return bad("rho and rho_0 must lie in (0, 1)");
        }
        if !(self.variance_floor > 0.0 && prob(self.tau_quantile) && prob(self.certainty)) {
            return bad("variance floor, tau quantile or certainty out of range");
        }
        if self.min_records < 2 {
            return bad("at least two training records are needed");
        }
        Ok(())
    }
}
