//! The execution engine: runs behaviours, programs and skills against the
//! simulator and persists every execution to memory.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::memory::{CallTrace, ExecutionRecord, Store, SubjectKind};
use crate::playing::{WalkMode, WalkPath};
use crate::skill::{
    catalog, validate, Abort, Diagnostic, ExecContext, Params, ProgramAst, ProgramBehaviour, Registry, Skill,
    SkillError,
};
use crate::world::{seeded_rng, HardwareLease, SimRng, Simulator, Situation, WorldError, WorldState};

/// Result of one execution.
#[derive(Debug, Clone)]
pub struct Execution {
    pub world: WorldState,
    pub record: ExecutionRecord,
    pub trace: CallTrace,
    /// ECM path taken by a trained skill.
    pub path: Option<WalkPath>,
    pub abort: Option<Abort>,
}

impl Execution {
    pub fn success(&self) -> bool {
        self.record.success
    }
}

/// Outcomes of running a skill from a batch of fresh situations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaRecord {
    pub skill: String,
    pub probed: Vec<DoaProbe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaProbe {
    pub situation: Situation,
    pub success: bool,
}

impl DoaRecord {
    pub fn successes(&self) -> usize {
        self.probed.iter().filter(|p| p.success).count()
    }
}

/// Simulator, registries and optional persistent memory.
#[derive(Debug)]
pub struct Engine {
    pub sim: Simulator,
    pub registry: Registry,
    store: Option<Store>,
    skill_locks: Mutex<BTreeMap<String, Arc<Mutex<()>>>>,
}

impl Engine {
    /// An engine holding only the primitive behaviours.
    pub fn bare(sim: Simulator, store: Option<Store>) -> Result<Self, SkillError> {
        let registry = Registry::with_primitives(&sim)?;
        let engine = Engine {
            sim,
            registry,
            store,
            skill_locks: Mutex::new(BTreeMap::new()),
        };
        if let Some(store) = &engine.store {
            for spec in engine.sim.hardware.specs() {
                let channels = serde_json::to_string(&spec.sensor_channels).expect("channels serialize");
                store.put_hardware(&spec.name, &format!("{:?}", spec.kind).to_lowercase(), &channels)?;
            }
            for b in engine.registry.behaviours() {
                let d = serde_json::to_string(b.descriptor()).expect("descriptor serializes");
                store.put_behaviour(&b.descriptor().id, &d, None)?;
            }
        }
        Ok(engine)
    }

    /// An engine with the default programs and skills installed.
    pub fn new(sim: Simulator, store: Option<Store>) -> Result<Self, SkillError> {
        let engine = Engine::bare(sim, store)?;
        catalog::install(&engine)?;
        Ok(engine)
    }

    /// An engine with the default programs and skills installed, resuming
    /// the programs and skills saved in `store`. Saved definitions replace
    /// the built-in ones. Entries that cannot be registered are returned with
    /// their errors.
    pub fn open(sim: Simulator, store: Store) -> Result<(Self, Vec<(String, SkillError)>), SkillError> {
        let mut programs = Vec::new();
        for (id, doc) in store.programs()? {
            programs.push((id, ProgramAst::from_json(&doc)?));
        }
        let mut skills = Vec::new();
        for (_, doc) in store.skills()? {
            skills.push(serde_json::from_str::<Skill>(&doc).map_err(|e| SkillError::Parse(e.to_string()))?);
        }
        let engine = Engine::new(sim, Some(store))?;
        let skipped = engine.restore(programs, skills);
        Ok((engine, skipped))
    }

    fn restore(&self, mut programs: Vec<(String, ProgramAst)>, mut skills: Vec<Skill>) -> Vec<(String, SkillError)> {
        loop {
            let mut failures = Vec::new();
            let before = programs.len() + skills.len();
            let mut pending = Vec::new();
            for (id, ast) in programs {
                if let Err(e) = self.restore_program(&id, ast.clone()) {
                    failures.push((id.clone(), e));
                    pending.push((id, ast));
                }
            }
            programs = pending;
            let mut pending = Vec::new();
            for skill in skills {
                let result = if self.registry.skill(&skill.id).is_ok() {
                    self.update_skill(skill.clone())
                } else {
                    self.create_skill(skill.clone())
                };
                if let Err(e) = result {
                    failures.push((skill.id.clone(), e));
                    pending.push(skill);
                }
            }
            skills = pending;
            if failures.is_empty() || programs.len() + skills.len() == before {
                return failures;
            }
        }
    }

    fn restore_program(&self, id: &str, ast: ProgramAst) -> Result<(), SkillError> {
        match self.program(id) {
            Ok(current) if current == ast => Ok(()),
            Ok(_) => self.update_program(id, ast),
            Err(SkillError::UnknownBehaviour(_)) => {
                let description = match self.store.as_ref().map(|s| s.behaviour_descriptor(id)) {
                    Some(Ok(Some(doc))) => serde_json::from_str::<crate::skill::BehaviourDescriptor>(&doc)
                        .map(|d| d.description)
                        .unwrap_or_default(),
                    _ => String::new(),
                };
                self.register_program(id, &description, ast)
            }
            Err(e) => Err(e),
        }
    }

    pub fn store(&self) -> Option<&Store> {
        self.store.as_ref()
    }

    /// Guard that serializes playing sessions of the same skill.
    pub fn skill_lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.skill_locks
            .lock()
            .expect("lock table")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    fn lease_waiting(&self, hardware: &BTreeSet<String>) -> Result<HardwareLease, SkillError> {
        loop {
            match self.sim.hardware.lease(hardware) {
                Err(WorldError::HardwareBusy(_)) => std::thread::sleep(Duration::from_millis(1)),
                other => return Ok(other?),
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        subject: &str,
        kind: SubjectKind,
        lease: HardwareLease,
        world: WorldState,
        situation: Option<Situation>,
        rng: &mut SimRng,
        body: impl FnOnce(&mut ExecContext<'_>, &mut Option<WalkPath>) -> Result<bool, Abort>,
    ) -> Result<Execution, SkillError> {
        let handles = lease.handles().to_vec();
        let hardware_config = handles.iter().map(|h| h.name.clone()).collect();
        let mut ctx = ExecContext::new(&self.sim, &self.registry, world, rng, handles);
        let mut path = None;
        let outcome = body(&mut ctx, &mut path);
        let recording = ctx.finish();
        drop(lease);
        let (success, abort) = match outcome {
            Ok(success) => (success, None),
            Err(abort) => (false, Some(abort)),
        };
        let mut record = ExecutionRecord {
            id: None,
            subject: subject.to_string(),
            subject_kind: kind,
            start_tick: recording.start_clock,
            end_tick: recording.world.clock.max(recording.start_clock),
            success,
            sensor: recording.sensor,
            profile: recording.profile,
            hardware_config,
            situation,
            failure: abort.as_ref().map(ToString::to_string),
        };
        if let Some(store) = &self.store {
            record.id = Some(store.persist_execution(&record)?);
        }
        Ok(Execution {
            world: recording.world,
            record,
            trace: recording.trace,
            path,
            abort,
        })
    }

    /// Runs one registered behaviour; fails at once if its hardware is busy.
    pub fn apply_behaviour(
        &self,
        world: WorldState,
        behaviour: &str,
        params: &Params,
        rng: &mut SimRng,
    ) -> Result<Execution, SkillError> {
        let b = self.registry.behaviour(behaviour)?;
        let d = b.descriptor();
        d.resolve_params(params)?;
        let lease = self.sim.hardware.lease(&d.required_hardware)?;
        let kind = match d.category {
            crate::skill::BehaviourCategory::Sensing => SubjectKind::SensingAction,
            _ => SubjectKind::Behaviour,
        };
        self.run(behaviour, kind, lease, world, None, rng, |ctx, _| {
            ctx.run_behaviour(behaviour, params).map(|_| true)
        })
    }

    pub fn create_skill(&self, skill: Skill) -> Result<Arc<Skill>, SkillError> {
        let skill = self.registry.register_skill(skill, &self.sim)?;
        self.persist_skill(&skill)?;
        Ok(skill)
    }

    pub fn update_skill(&self, skill: Skill) -> Result<Arc<Skill>, SkillError> {
        let skill = self.registry.update_skill(skill, &self.sim)?;
        self.persist_skill(&skill)?;
        Ok(skill)
    }

    fn persist_skill(&self, skill: &Skill) -> Result<(), SkillError> {
        if let Some(store) = &self.store {
            let doc = serde_json::to_string(skill).expect("skill serializes");
            store.put_skill(&skill.id, &doc)?;
        }
        Ok(())
    }

    /// Diagnostics for `ast`; `owner` is the id it is about to be registered
    /// under, if any.
    pub fn validate_program(&self, ast: &ProgramAst, owner: Option<&str>) -> Vec<Diagnostic> {
        let forbidden = owner.map(|o| BTreeSet::from([o.to_string()])).unwrap_or_default();
        validate(ast, &self.registry, &self.sim, &forbidden)
    }

    fn program_behaviour(&self, id: &str, description: &str, ast: ProgramAst) -> Result<ProgramBehaviour, SkillError> {
        let diagnostics = self.validate_program(&ast, Some(id));
        if !diagnostics.is_empty() {
            return Err(SkillError::InvalidProgram(diagnostics));
        }
        Ok(ProgramBehaviour::new(id, description, ast, &self.registry))
    }

    fn persist_program(&self, id: &str) -> Result<(), SkillError> {
        if let Some(store) = &self.store {
            let b = self.registry.behaviour(id)?;
            let d = serde_json::to_string(b.descriptor()).expect("descriptor serializes");
            let p = b.program().map(ProgramAst::to_json);
            store.put_behaviour(id, &d, p.as_deref())?;
        }
        Ok(())
    }

    /// Validates a program and registers it as a composite behaviour.
    pub fn register_program(&self, id: &str, description: &str, ast: ProgramAst) -> Result<(), SkillError> {
        let b = self.program_behaviour(id, description, ast)?;
        self.registry.register_behaviour(Arc::new(b), &self.sim)?;
        self.persist_program(id)
    }

    /// Replaces the AST of a registered program.
    pub fn update_program(&self, id: &str, ast: ProgramAst) -> Result<(), SkillError> {
        let description = self.registry.behaviour(id)?.descriptor().description.clone();
        let b = self.program_behaviour(id, &description, ast)?;
        self.registry.replace_program(Arc::new(b), &self.sim)?;
        self.persist_program(id)
    }

    pub fn program(&self, id: &str) -> Result<ProgramAst, SkillError> {
        self.registry
            .behaviour(id)?
            .program()
            .cloned()
            .ok_or_else(|| SkillError::NotAProgram(id.to_string()))
    }

    /// Runs a validated program with its declared hardware. The execution
    /// succeeds when every node completes.
    pub fn interpret_program(
        &self,
        subject: &str,
        ast: &ProgramAst,
        world: WorldState,
        situation: Option<Situation>,
        rng: &mut SimRng,
    ) -> Result<Execution, SkillError> {
        let diagnostics = self.validate_program(ast, None);
        if !diagnostics.is_empty() {
            return Err(SkillError::InvalidProgram(diagnostics));
        }
        let lease = self.lease_waiting(&ast.declared_hardware())?;
        self.run(subject, SubjectKind::Program, lease, world, situation, rng, |ctx, _| {
            crate::skill::run_node(ctx, &ast.root).map(|_| true)
        })
    }

    /// Runs a registered skill greedily.
    pub fn execute_skill(
        &self,
        id: &str,
        world: WorldState,
        situation: Option<Situation>,
        rng: &mut SimRng,
    ) -> Result<Execution, SkillError> {
        let skill = self.registry.skill(id)?;
        self.execute_skill_with(&skill, world, situation, WalkMode::Greedy, rng)
    }

    /// Runs `skill`, which need not be the registered version, walking its
    /// ECM in `mode`.
    pub fn execute_skill_with(
        &self,
        skill: &Skill,
        world: WorldState,
        situation: Option<Situation>,
        mode: WalkMode,
        rng: &mut SimRng,
    ) -> Result<Execution, SkillError> {
        let lease = self.lease_waiting(&skill.required_hardware)?;
        self.run(&skill.id, SubjectKind::Skill, lease, world, situation, rng, |ctx, path| {
            ctx.run_skill(skill, mode, path)
        })
    }

    /// Runs the skill from a fresh world per distinct situation, with the
    /// generator seeded from the situation. Nothing is learned.
    pub fn probe_doa(&self, id: &str, situations: &[Situation]) -> Result<DoaRecord, SkillError> {
        let mut seen = BTreeSet::new();
        let mut probed = Vec::new();
        for s in situations {
            if !seen.insert((s.scenario, s.seed, s.attribute)) {
                continue;
            }
            let world = s.instantiate(&self.sim.catalog)?;
            let mut rng = seeded_rng(s.seed);
            let exec = self.execute_skill(id, world, Some(*s), &mut rng)?;
            probed.push(DoaProbe {
                situation: *s,
                success: exec.success(),
            });
        }
        Ok(DoaRecord {
            skill: id.to_string(),
            probed,
        })
    }

    /// One situation per attribute value of the skill's scenario.
    pub fn attribute_situations(&self, id: &str, seed: u64) -> Result<Vec<Situation>, SkillError> {
        let skill = self.registry.skill(id)?;
        let scenario = skill
            .scenario
            .ok_or_else(|| SkillError::InvalidSkill(id.to_string(), "no scenario".into()))?;
        let spec = self.sim.catalog.scenario(scenario)?;
        Ok(spec
            .attribute_values()
            .into_iter()
            .map(|a| Situation::with_attribute(scenario, seed, a))
            .collect())
    }

    pub fn list_skills_for_hardware(&self, config: &BTreeSet<String>) -> Vec<String> {
        self.registry.skills_for_hardware(config)
    }

    pub fn evaluate_success(&self, predicate: &str, world: &WorldState) -> Result<bool, SkillError> {
        Ok(self.sim.read_success_ground_truth(world, predicate)?)
    }

    pub fn skill_coverage(&self, id: &str) -> Result<BTreeSet<String>, SkillError> {
        self.registry.skill_coverage(id)
    }
}
