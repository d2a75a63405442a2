//! Behaviour and skill registries with instance uniqueness.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::behaviour::{Behaviour, CallNode};
use super::primitives::{primitives, VOID_BEHAVIOUR};
use super::SkillError;
use crate::playing::{Ecm, PrepAction};
use crate::world::{ScenarioId, Simulator};

/// What a skill may try before its basic behaviour while playing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayingSpec {
    pub sensing_actions: Vec<String>,
    pub preparations: Vec<PrepAction>,
}

/// A basic behaviour paired with a success predicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Skill {
    pub id: String,
    #[serde(default)]
    pub description: String,
    /// `None` is the empty basic behaviour.
    pub basic_behaviour: Option<String>,
    pub predicate: String,
    pub required_hardware: BTreeSet<String>,
    /// Scenario the skill is played in.
    #[serde(default)]
    pub scenario: Option<ScenarioId>,
    #[serde(default)]
    pub playing: Option<PlayingSpec>,
    #[serde(default)]
    pub ecm: Option<Ecm>,
    #[serde(default)]
    pub promoted: bool,
}

impl Skill {
    pub fn new(id: &str, basic_behaviour: Option<&str>, predicate: &str, hardware: &[&str]) -> Self {
        Skill {
            id: id.into(),
            description: String::new(),
            basic_behaviour: basic_behaviour.map(Into::into),
            predicate: predicate.into(),
            required_hardware: hardware.iter().map(|s| s.to_string()).collect(),
            scenario: None,
            playing: None,
            ecm: None,
            promoted: false,
        }
    }

    pub fn describe(mut self, description: &str) -> Self {
        self.description = description.into();
        self
    }

    pub fn played_in(mut self, scenario: ScenarioId, playing: PlayingSpec) -> Self {
        self.scenario = Some(scenario);
        self.playing = Some(playing);
        self
    }

    pub fn basic_behaviour_id(&self) -> &str {
        self.basic_behaviour.as_deref().unwrap_or(VOID_BEHAVIOUR)
    }
}

/// Registered behaviours (primitives and programs) and skills.
#[derive(Debug, Default)]
pub struct Registry {
    behaviours: RwLock<BTreeMap<String, Arc<dyn Behaviour>>>,
    skills: RwLock<BTreeMap<String, Arc<Skill>>>,
}

impl Registry {
    /// A registry holding every primitive behaviour.
    pub fn with_primitives(sim: &Simulator) -> Result<Self, SkillError> {
        let registry = Registry::default();
        for b in primitives() {
            registry.register_behaviour(b, sim)?;
        }
        Ok(registry)
    }

    fn check_behaviour(&self, b: &dyn Behaviour, sim: &Simulator) -> Result<(), SkillError> {
        let d = b.descriptor();
        d.check()?;
        if let Some(h) = d.required_hardware.iter().find(|h| !sim.hardware.contains(h)) {
            return Err(SkillError::UnknownHardware(h.clone()));
        }
        if let Some(f) = d.functions().into_iter().find(|f| !sim.functions.contains(f)) {
            return Err(SkillError::UnknownFunction {
                behaviour: d.id.clone(),
                function: f,
            });
        }
        Ok(())
    }

    pub fn register_behaviour(&self, b: Arc<dyn Behaviour>, sim: &Simulator) -> Result<(), SkillError> {
        self.check_behaviour(b.as_ref(), sim)?;
        let mut map = self.behaviours.write().expect("registry lock");
        let id = b.descriptor().id.clone();
        if map.contains_key(&id) || self.skills.read().expect("registry lock").contains_key(&id) {
            return Err(SkillError::DuplicateBehaviour(id));
        }
        map.insert(id, b);
        Ok(())
    }

    /// Replaces a program behaviour; primitives cannot be replaced.
    pub fn replace_program(&self, b: Arc<dyn Behaviour>, sim: &Simulator) -> Result<(), SkillError> {
        self.check_behaviour(b.as_ref(), sim)?;
        let id = b.descriptor().id.clone();
        let mut map = self.behaviours.write().expect("registry lock");
        match map.get(&id) {
            Some(old) if old.program().is_some() => {
                map.insert(id, b);
                Ok(())
            }
            Some(_) => Err(SkillError::NotAProgram(id)),
            None => Err(SkillError::UnknownBehaviour(id)),
        }
    }

    pub fn behaviour(&self, id: &str) -> Result<Arc<dyn Behaviour>, SkillError> {
        self.behaviours
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SkillError::UnknownBehaviour(id.to_string()))
    }

    pub fn behaviours(&self) -> Vec<Arc<dyn Behaviour>> {
        self.behaviours.read().expect("registry lock").values().cloned().collect()
    }

    fn check_skill(&self, skill: &Skill, sim: &Simulator) -> Result<(), SkillError> {
        let invalid = |m: String| SkillError::InvalidSkill(skill.id.clone(), m);
        if skill.id.is_empty() {
            return Err(invalid("empty id".into()));
        }
        if !sim.predicates.contains(&skill.predicate) {
            return Err(SkillError::UnknownPredicate(skill.predicate.clone()));
        }
        if let Some(h) = skill.required_hardware.iter().find(|h| !sim.hardware.contains(h)) {
            return Err(SkillError::UnknownHardware(h.clone()));
        }
        let basic = self.behaviour(skill.basic_behaviour_id())?;
        let missing: Vec<&String> = basic
            .descriptor()
            .required_hardware
            .difference(&skill.required_hardware)
            .collect();
        if !missing.is_empty() {
            return Err(invalid(format!("basic behaviour needs undeclared hardware {missing:?}")));
        }
        if let Some(spec) = &skill.playing {
            for s in &spec.sensing_actions {
                self.behaviour(s)?;
            }
            for p in &spec.preparations {
                for (is_skill, id) in p.references() {
                    if is_skill {
                        self.skill(&id)?;
                    } else {
                        self.behaviour(&id)?;
                    }
                }
            }
        }
        if skill.promoted && skill.ecm.is_none() {
            return Err(invalid("promoted without a trained ECM".into()));
        }
        Ok(())
    }

    pub fn register_skill(&self, skill: Skill, sim: &Simulator) -> Result<Arc<Skill>, SkillError> {
        self.check_skill(&skill, sim)?;
        let mut map = self.skills.write().expect("registry lock");
        if map.contains_key(&skill.id) {
            return Err(SkillError::DuplicateSkill(skill.id));
        }
        let skill = Arc::new(skill);
        map.insert(skill.id.clone(), skill.clone());
        Ok(skill)
    }

    /// Stores a new version of an already registered skill, for example
    /// after training.
    pub fn update_skill(&self, skill: Skill, sim: &Simulator) -> Result<Arc<Skill>, SkillError> {
        self.check_skill(&skill, sim)?;
        let mut map = self.skills.write().expect("registry lock");
        if !map.contains_key(&skill.id) {
            return Err(SkillError::UnknownSkill(skill.id));
        }
        let skill = Arc::new(skill);
        map.insert(skill.id.clone(), skill.clone());
        Ok(skill)
    }

    pub fn skill(&self, id: &str) -> Result<Arc<Skill>, SkillError> {
        self.skills
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SkillError::UnknownSkill(id.to_string()))
    }

    pub fn skills(&self) -> Vec<Arc<Skill>> {
        self.skills.read().expect("registry lock").values().cloned().collect()
    }

    /// Skills whose hardware needs are covered by `config`, sorted by id.
    pub fn skills_for_hardware(&self, config: &BTreeSet<String>) -> Vec<String> {
        self.skills
            .read()
            .expect("registry lock")
            .values()
            .filter(|s| s.required_hardware.is_subset(config))
            .map(|s| s.id.clone())
            .collect()
    }

    /// Static call tree and duration of the skill's basic behaviour.
    pub fn skill_call_tree(&self, skill: &Skill) -> (Vec<CallNode>, u32) {
        self.behaviour(skill.basic_behaviour_id())
            .map(|b| (b.descriptor().call_tree.clone(), b.descriptor().duration_ticks))
            .unwrap_or_default()
    }

    /// Functions the skill's basic behaviour may enter.
    pub fn skill_coverage(&self, id: &str) -> Result<BTreeSet<String>, SkillError> {
        let skill = self.skill(id)?;
        Ok(super::behaviour::tree_functions(&self.skill_call_tree(&skill).0))
    }
}
