//! The haptic database: labelled sensor windows of sensing actions.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::PlayingError;
use crate::engine::Engine;
use crate::memory::SensorMatrix;
use crate::skill::{BehaviourCategory, Params, SkillError};
use crate::world::{SimRng, Situation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HapticEntry {
    pub sensing: String,
    pub situation: Situation,
    /// Ground-truth attribute label of the generating world.
    pub label: String,
    pub sensor: SensorMatrix,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HapticDatabase {
    pub skill: String,
    pub entries: Vec<HapticEntry>,
}

fn first_seen<'a>(items: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for i in items {
        if !out.contains(i) {
            out.push(i.clone());
        }
    }
    out
}

impl HapticDatabase {
    /// Sensing actions in order of first appearance.
    pub fn sensing_actions(&self) -> Vec<String> {
        first_seen(self.entries.iter().map(|e| &e.sensing))
    }

    /// Situation labels of one sensing action in order of first appearance.
    pub fn labels(&self, sensing: &str) -> Vec<String> {
        first_seen(self.entries.iter().filter(|e| e.sensing == sensing).map(|e| &e.label))
    }
}

/// Runs every sensing action on every situation `repetitions` times, each
/// from a fresh world whose layout seed is drawn from `rng`.
pub fn collect_haptic_database(
    engine: &Engine,
    skill: &str,
    sensing_actions: &[String],
    situations: &[Situation],
    repetitions: usize,
    rng: &mut SimRng,
) -> Result<HapticDatabase, PlayingError> {
    if repetitions == 0 {
        return Err(PlayingError::InvalidConfig("repetitions must be at least 1".into()));
    }
    for s in sensing_actions {
        let b = engine.registry.behaviour(s)?;
        if b.descriptor().category != BehaviourCategory::Sensing {
            return Err(PlayingError::Skill(SkillError::InvalidDescriptor(
                s.clone(),
                "not a sensing action".into(),
            )));
        }
    }
    let mut db = HapticDatabase {
        skill: skill.to_string(),
        entries: Vec::new(),
    };
    for situation in situations {
        for _ in 0..repetitions {
            for sensing in sensing_actions {
                let s = Situation {
                    seed: rng.next_u64(),
                    ..*situation
                };
                let world = s.instantiate(&engine.sim.catalog)?;
                let label = world
                    .situation_attribute()
                    .map(|a| a.label())
                    .unwrap_or_else(|| s.label());
                let exec = engine.apply_behaviour(world, sensing, &Params::new(), rng)?;
                db.entries.push(HapticEntry {
                    sensing: sensing.clone(),
                    situation: s,
                    label,
                    sensor: exec.record.sensor,
                });
            }
        }
    }
    Ok(db)
}
