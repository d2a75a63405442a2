//! Autonomous playing: haptic data collection, perceptual-state training and
//! projective-simulation learning over a five-layer ECM.

mod ecm;
mod haptic;
mod perception;
mod session;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::MemoryError;
use crate::skill::{Node, Params, ProgramAst, SkillError, VOID_BEHAVIOUR};
use crate::world::WorldError;

pub use ecm::{EcmDocument, EdgeDocument, Ecm, LayerDocument, ECM_VERSION};
pub use haptic::{collect_haptic_database, HapticDatabase, HapticEntry};
pub use perception::{features, Classifier, PerceptualModel};
pub use session::{play, preparations_for, EpisodeEvent, PathLabels, PlayReport, SuccessCurve};

#[derive(Debug, Error)]
pub enum PlayingError {
    #[error("sensing action {0:?} has no trained classifier")]
    UnknownSensing(String),
    #[error("sensing action {sensing:?} has {labels} situation label(s), at least 2 are needed")]
    InsufficientLabels { sensing: String, labels: usize },
    #[error("invalid playing configuration: {0}")]
    InvalidConfig(String),
    #[error("the ECM needs at least one {0}")]
    EmptyLayer(&'static str),
    #[error("path does not belong to this ECM: {0}")]
    PathMismatch(String),
    #[error("skill {0:?} has no playing setup")]
    NotPlayable(String),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// A layer-4 clip: something run before the basic behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrepAction {
    Void,
    Behaviour {
        behaviour: String,
        #[serde(default)]
        params: Params,
    },
    Skill {
        skill: String,
    },
    Program {
        label: String,
        program: Node,
    },
}

impl PrepAction {
    pub fn behaviour(id: &str, params: Params) -> Self {
        PrepAction::Behaviour {
            behaviour: id.into(),
            params,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PrepAction::Void => VOID_BEHAVIOUR.to_string(),
            PrepAction::Behaviour { behaviour, params } if params.is_empty() => behaviour.clone(),
            PrepAction::Behaviour { behaviour, params } => {
                let args: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("{behaviour}({})", args.join(", "))
            }
            PrepAction::Skill { skill } => skill.clone(),
            PrepAction::Program { label, .. } => label.clone(),
        }
    }

    /// Skills (`true`) and behaviours (`false`) this action runs directly.
    pub fn references(&self) -> Vec<(bool, String)> {
        match self {
            PrepAction::Void => vec![(false, VOID_BEHAVIOUR.to_string())],
            PrepAction::Behaviour { behaviour, .. } => vec![(false, behaviour.clone())],
            PrepAction::Skill { skill } => vec![(true, skill.clone())],
            PrepAction::Program { program, .. } => {
                let ast = ProgramAst::new(program.clone());
                ast.skill_calls()
                    .into_iter()
                    .map(|s| (true, s))
                    .chain(ast.behaviour_calls().into_iter().map(|b| (false, b)))
                    .collect()
            }
        }
    }
}

/// How a walk chooses among stochastic out-edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkMode {
    /// Sample proportionally to h-values.
    Explore,
    /// Follow the largest h-value, lowest index on ties.
    Greedy,
}

/// Indices of the clips visited below the root: sensing action, perceptual
/// state and preparatory action. The basic behaviour clip is implied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkPath {
    pub sensing: usize,
    pub percept: usize,
    pub prep: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SituationSampler {
    /// Uniform over the scenario's attribute values.
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlayConfig {
    pub episodes: usize,
    /// Reward λ added to every stochastic edge of a successful path.
    pub reward: f64,
    /// Damping γ pulling every h-value towards `h_min` after each episode.
    pub damping: f64,
    pub h_min: f64,
    pub seed: u64,
    pub sampler: SituationSampler,
    /// Repetitions of each sensing action per situation in the haptic database.
    pub haptic_repetitions: usize,
    pub holdout_fraction: f64,
    pub promotion_window: usize,
    pub promotion_threshold: f64,
}

impl Default for PlayConfig {
    fn default() -> Self {
        PlayConfig {
            episodes: 500,
            reward: 1.0,
            damping: 0.0,
            h_min: 1.0,
            seed: 42,
            sampler: SituationSampler::Uniform,
            haptic_repetitions: 10,
            holdout_fraction: 0.25,
            promotion_window: 50,
            promotion_threshold: 0.8,
        }
    }
}

impl PlayConfig {
    pub fn validate(&self) -> Result<(), PlayingError> {
        let bad = |m: &str| Err(PlayingError::InvalidConfig(m.to_string()));
        if !(self.reward > 0.0 && self.reward.is_finite()) {
            return bad("reward must be positive");
        }
        if !(0.0..1.0).contains(&self.damping) {
            return bad("damping must lie in [0, 1)");
        }
        if !(self.h_min > 0.0 && self.h_min.is_finite()) {
            return bad("h_min must be positive");
        }
        if self.haptic_repetitions == 0 {
            return bad("haptic repetitions must be at least 1");
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction <= 0.5) {
            return bad("holdout fraction must lie in (0, 0.5]");
        }
        if !(0.0..=1.0).contains(&self.promotion_threshold) || self.promotion_window == 0 {
            return bad("promotion needs a window of at least 1 and a threshold in [0, 1]");
        }
        Ok(())
    }
}

/// Index chosen from `weights` under `mode`.
pub(crate) fn choose(weights: &[f64], mode: WalkMode, rng: &mut impl Rng) -> usize {
    match mode {
        WalkMode::Greedy => argmax(weights),
        WalkMode::Explore => {
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    return i;
                }
                u -= w;
            }
            weights.len() - 1
        }
    }
}

/// Index of the largest weight, lowest index on ties.
pub(crate) fn argmax(weights: &[f64]) -> usize {
    let mut best = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > weights[best] {
            best = i;
        }
    }
    best
}
