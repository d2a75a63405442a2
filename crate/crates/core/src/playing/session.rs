//! The playing loop: sample a situation, walk the ECM, reinforce.

use rand::seq::IndexedRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{collect_haptic_database, Ecm, PerceptualModel, PlayConfig, PlayingError, PrepAction, WalkMode};
use crate::engine::Engine;
use crate::skill::Skill;
use crate::world::{seeded_rng, Situation};

/// Labels of the clips a walk visited.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathLabels {
    pub sensing: String,
    pub percept: String,
    pub prep: String,
    pub basic: String,
}

/// Published after every episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEvent {
    pub episode: usize,
    pub situation: String,
    pub path: Option<PathLabels>,
    pub success: bool,
    pub running_mean: f64,
    pub record_id: Option<i64>,
}

/// Per-episode outcomes of a playing session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    pub outcomes: Vec<bool>,
}

impl SuccessCurve {
    pub fn push(&mut self, success: bool) {
        self.outcomes.push(success);
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Mean success over the first `n` episodes.
    pub fn running_mean(&self, n: usize) -> f64 {
        let n = n.min(self.outcomes.len());
        if n == 0 {
            return 0.0;
        }
        self.outcomes[..n].iter().filter(|s| **s).count() as f64 / n as f64
    }

    /// Success rate over the last `window` episodes.
    pub fn trailing_rate(&self, window: usize) -> f64 {
        let tail = &self.outcomes[self.outcomes.len().saturating_sub(window)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|s| **s).count() as f64 / tail.len() as f64
    }

    /// `episode,outcome,running_mean` rows, episodes counted from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,outcome,running_mean\n");
        for (i, s) in self.outcomes.iter().enumerate() {
            out.push_str(&format!("{},{},{:.6}\n", i + 1, u8::from(*s), self.running_mean(i + 1)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayReport {
    pub skill: String,
    pub ecm: Ecm,
    pub curve: SuccessCurve,
    pub promoted: bool,
}

/// The skill's own preparatory actions plus every promoted skill whose
/// hardware it has.
pub fn preparations_for(engine: &Engine, skill: &Skill) -> Vec<PrepAction> {
    let mut preps = skill.playing.as_ref().map(|p| p.preparations.clone()).unwrap_or_default();
    for other in engine.registry.skills() {
        if other.id != skill.id && other.promoted && other.required_hardware.is_subset(&skill.required_hardware) {
            let action = PrepAction::Skill { skill: other.id.clone() };
            if !preps.contains(&action) {
                preps.push(action);
            }
        }
    }
    preps
}

/// Trains the skill from scratch: haptic database, perceptual model, fresh
/// ECM, then `config.episodes` rewarded walks. The trained ECM is stored
/// with the skill, which is promoted when its trailing success rate reaches
/// the threshold.
pub fn play(
    engine: &Engine,
    skill_id: &str,
    config: &PlayConfig,
    mut on_episode: impl FnMut(&EpisodeEvent),
) -> Result<PlayReport, PlayingError> {
    config.validate()?;
    let lock = engine.skill_lock(skill_id);
    let _guard = lock.lock().expect("skill lock");
    let skill = engine.registry.skill(skill_id)?;
    let spec = skill
        .playing
        .as_ref()
        .ok_or_else(|| PlayingError::NotPlayable(skill_id.to_string()))?;
    let situations = engine.attribute_situations(skill_id, 0)?;
    if situations.is_empty() {
        return Err(PlayingError::NotPlayable(skill_id.to_string()));
    }
    let mut rng = seeded_rng(config.seed);

    let db = collect_haptic_database(
        engine,
        skill_id,
        &spec.sensing_actions,
        &situations,
        config.haptic_repetitions,
        &mut rng,
    )?;
    let model = PerceptualModel::train(&db, config.holdout_fraction, &mut rng)?;
    let mut ecm = Ecm::build(
        skill_id,
        spec.sensing_actions.clone(),
        model,
        preparations_for(engine, &skill),
        skill.basic_behaviour_id(),
        config.h_min,
    )?;

    let mut curve = SuccessCurve::default();
    for episode in 0..config.episodes {
        let template = situations.choose(&mut rng).expect("situations are not empty");
        let situation = Situation {
            seed: rng.next_u64(),
            ..*template
        };
        let world = situation.instantiate(&engine.sim.catalog)?;
        let mut walker = (*skill).clone();
        walker.ecm = Some(ecm);
        let exec = engine.execute_skill_with(&walker, world, Some(situation), WalkMode::Explore, &mut rng)?;
        ecm = walker.ecm.take().expect("ecm was set");
        let success = exec.success();
        if let Some(path) = &exec.path {
            ecm.update(path, success, config.reward, config.damping)?;
        }
        curve.push(success);
        let path = exec.path.map(|p| PathLabels {
            sensing: ecm.sensing[p.sensing].clone(),
            percept: ecm.percept_labels(p.sensing)[p.percept].clone(),
            prep: ecm.preparations[p.prep].label(),
            basic: ecm.basic.clone(),
        });
        on_episode(&EpisodeEvent {
            episode: episode + 1,
            situation: situation.label(),
            path,
            success,
            running_mean: curve.running_mean(curve.len()),
            record_id: exec.record.id,
        });
    }

    let promoted = curve.len() >= config.promotion_window
        && curve.trailing_rate(config.promotion_window) >= config.promotion_threshold;
    let mut trained = (*skill).clone();
    trained.ecm = Some(ecm.clone());
    trained.promoted = promoted;
    engine.update_skill(trained)?;
    Ok(PlayReport {
        skill: skill_id.to_string(),
        ecm,
        curve,
        promoted,
    })
}
