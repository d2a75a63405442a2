//! Tick-by-tick execution context shared by behaviours, programs and skills.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::behaviour::{CallNode, Params};
use super::{Registry, Skill};
use crate::memory::{CallProfileMatrix, CallTrace, Profiler, ProfileToken, RecordingSession, SensorMatrix};
use crate::playing::{PrepAction, WalkMode, WalkPath};
use crate::world::{FaultMode, FaultSpec, HardwareHandle, SimRng, Simulator, Stimulus, WorldState};

const MAX_SKILL_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AbortReason {
    /// An injected fault fired when the function was entered.
    Fault { function: String },
    /// A behaviour could not carry out its action.
    Behaviour { behaviour: String, message: String },
    /// A nested skill finished without satisfying its predicate.
    SkillFailed { skill: String },
}

/// Why and when an execution stopped early.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Abort {
    pub tick: u32,
    pub reason: AbortReason,
}

impl fmt::Display for Abort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.reason {
            AbortReason::Fault { function } => write!(f, "fault in {function} at tick {}", self.tick),
            AbortReason::Behaviour { behaviour, message } => {
                write!(f, "{behaviour} failed at tick {}: {message}", self.tick)
            }
            AbortReason::SkillFailed { skill } => write!(f, "skill {skill} failed at tick {}", self.tick),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Motion {
    from: [f64; 3],
    to: [f64; 3],
    steps: u32,
    done: u32,
}

/// Raw products of one execution.
#[derive(Debug, Clone)]
pub struct Recording {
    pub world: WorldState,
    pub sensor: SensorMatrix,
    pub profile: CallProfileMatrix,
    pub trace: CallTrace,
    pub start_clock: u64,
}

/// Mutable state of a running execution: the world, the recording session,
/// the profiler and the tick counter.
pub struct ExecContext<'a> {
    sim: &'a Simulator,
    registry: &'a Registry,
    world: WorldState,
    rng: &'a mut SimRng,
    fault_rng: SimRng,
    faults: Vec<(FaultSpec, bool)>,
    handles: Vec<Arc<HardwareHandle>>,
    recorder: RecordingSession,
    profiler: Profiler,
    tick: u32,
    start_clock: u64,
    stimulus: Stimulus,
    bias: f64,
    motion: Option<Motion>,
    blackboard: BTreeMap<String, [f64; 2]>,
    current: Vec<String>,
    depth: usize,
}

impl<'a> ExecContext<'a> {
    pub fn new(
        sim: &'a Simulator,
        registry: &'a Registry,
        world: WorldState,
        rng: &'a mut SimRng,
        handles: Vec<Arc<HardwareHandle>>,
    ) -> Self {
        // fault decisions use their own stream so that inactive faults never
        // perturb the sensor noise sequence
        let fault_rng = SimRng::seed_from_u64(rng.next_u64());
        let faults = sim.faults.snapshot().into_iter().map(|f| (f, false)).collect();
        let recorder = RecordingSession::open(&handles);
        let start_clock = world.clock;
        ExecContext {
            sim,
            registry,
            world,
            rng,
            fault_rng,
            faults,
            handles,
            recorder,
            profiler: Profiler::new(),
            tick: 0,
            start_clock,
            stimulus: Stimulus::default(),
            bias: 0.0,
            motion: None,
            blackboard: BTreeMap::new(),
            current: Vec::new(),
            depth: 0,
        }
    }

    pub fn sim(&self) -> &'a Simulator {
        self.sim
    }

    pub fn registry(&self) -> &'a Registry {
        self.registry
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    pub fn rng(&mut self) -> &mut SimRng {
        self.rng
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    pub fn has_hardware(&self, name: &str) -> bool {
        self.handles.iter().any(|h| h.name == name)
    }

    pub fn blackboard(&self, key: &str) -> Option<[f64; 2]> {
        self.blackboard.get(key).copied()
    }

    pub fn set_blackboard(&mut self, key: &str, value: [f64; 2]) {
        self.blackboard.insert(key.to_string(), value);
    }

    /// Sensor columns recorded so far for `channels` over `[from, to)`.
    pub fn window(&self, channels: &[String], from: u32, to: u32) -> Option<SensorMatrix> {
        self.recorder.window(channels, from as usize, to as usize).ok()
    }

    /// Abort attributed to the behaviour currently running.
    pub fn fail(&self, message: impl Into<String>) -> Abort {
        Abort {
            tick: self.tick.saturating_sub(1),
            reason: AbortReason::Behaviour {
                behaviour: self.current.last().cloned().unwrap_or_default(),
                message: message.into(),
            },
        }
    }

    /// Enters an instrumented function, firing any fault registered on it.
    pub fn enter(&mut self, function: &str) -> Result<ProfileToken, Abort> {
        let token = self
            .profiler
            .profile_enter(function, self.tick)
            .expect("profiler ticks are monotone");
        let mut fail = false;
        for (spec, activated) in self.faults.iter_mut() {
            if spec.function_id != function {
                continue;
            }
            let fires = match spec.trigger_probability {
                p if p >= 1.0 => true,
                p if p <= 0.0 => false,
                p => self.fault_rng.random_bool(p),
            };
            if !fires {
                continue;
            }
            match spec.mode {
                FaultMode::FailHard => fail = true,
                FaultMode::DegradeSensors if !*activated => {
                    *activated = true;
                    self.bias += spec.sensor_bias;
                }
                FaultMode::DegradeSensors => {}
            }
        }
        if fail {
            let tick = self.tick;
            self.sample_column();
            self.tick += 1;
            self.world.clock += 1;
            self.profiler.close_all(tick);
            self.motion = None;
            self.stimulus = Stimulus::default();
            return Err(Abort {
                tick,
                reason: AbortReason::Fault {
                    function: function.to_string(),
                },
            });
        }
        Ok(token)
    }

    /// Exits at the last tick that has been sampled.
    pub fn exit(&mut self, token: ProfileToken) {
        let tick = self.tick.saturating_sub(1);
        self.profiler.profile_exit(token, tick).expect("matching exit");
    }

    fn sample_column(&mut self) {
        self.recorder.begin_tick(self.tick).expect("sequential ticks");
        for h in &self.handles {
            let values = self.sim.sensors.sample(h, &self.world, &self.stimulus, self.bias, self.rng);
            self.recorder
                .record_snapshot(h, &values, self.tick)
                .expect("handle belongs to session");
        }
    }

    /// Advances one tick: moves the arm, samples every handle, advances the clock.
    pub fn step(&mut self) {
        if let Some(m) = self.motion.as_mut() {
            if m.done < m.steps {
                m.done += 1;
                let f = m.done as f64 / m.steps as f64;
                for i in 0..3 {
                    self.world.arm_pose[i] = m.from[i] + (m.to[i] - m.from[i]) * f;
                }
            }
            if let Some(held) = self.world.held_object.clone() {
                let [x, y, _] = self.world.arm_pose;
                if let Some(o) = self.world.object_mut(&held) {
                    o.position = crate::world::clamp_to_workspace([x, y]);
                }
            }
        }
        self.sample_column();
        self.tick += 1;
        self.world.clock += 1;
    }

    /// Samples one column without advancing the world clock.
    pub fn hold_step(&mut self) {
        self.sample_column();
        self.tick += 1;
    }

    pub fn run_call_tree(&mut self, nodes: &[CallNode]) -> Result<(), Abort> {
        for node in nodes {
            let token = self.enter(&node.function)?;
            for _ in 0..node.ticks {
                self.step();
            }
            self.run_call_tree(&node.children)?;
            self.exit(token);
        }
        Ok(())
    }

    /// Runs `tree` while the arm moves linearly to `arm_target` and the
    /// contact sensors report `stimulus`.
    pub fn perform(
        &mut self,
        tree: &[CallNode],
        arm_target: Option<[f64; 3]>,
        stimulus: Stimulus,
    ) -> Result<(), Abort> {
        let steps = super::behaviour::tree_span(tree);
        self.motion = arm_target.map(|to| Motion {
            from: self.world.arm_pose,
            to,
            steps,
            done: 0,
        });
        self.stimulus = stimulus;
        let result = self.run_call_tree(tree);
        if result.is_ok() {
            if let Some(m) = self.motion {
                self.world.arm_pose = m.to;
            }
        }
        self.motion = None;
        self.stimulus = Stimulus::default();
        result
    }

    /// Runs a registered behaviour with schema-checked parameters.
    pub fn run_behaviour(&mut self, id: &str, params: &Params) -> Result<(), Abort> {
        let behaviour = self
            .registry
            .behaviour(id)
            .map_err(|e| self.fail(e.to_string()))?;
        let d = behaviour.descriptor();
        if let Some(missing) = d.required_hardware.iter().find(|h| !self.has_hardware(h)) {
            return Err(self.fail(format!("{id} needs hardware {missing} which is not in use")));
        }
        let params = d.resolve_params(params).map_err(|e| self.fail(e.to_string()))?;
        self.current.push(id.to_string());
        let result = behaviour.run(self, &params);
        self.current.pop();
        result
    }

    /// Runs a skill inside this execution. Trained skills walk their ECM;
    /// untrained skills run their basic behaviour alone.
    pub fn run_skill(&mut self, skill: &Skill, mode: WalkMode, path: &mut Option<WalkPath>) -> Result<bool, Abort> {
        if self.depth >= MAX_SKILL_DEPTH {
            return Err(self.fail(format!("skill nesting deeper than {MAX_SKILL_DEPTH}")));
        }
        self.depth += 1;
        let result = self.run_skill_inner(skill, mode, path);
        self.depth -= 1;
        result
    }

    fn run_skill_inner(&mut self, skill: &Skill, mode: WalkMode, path: &mut Option<WalkPath>) -> Result<bool, Abort> {
        if let Some(ecm) = &skill.ecm {
            let s = ecm.choose_sensing(mode, self.rng);
            let sensing = ecm.sensing[s].clone();
            let from = self.tick;
            self.run_behaviour(&sensing, &Params::new())?;
            let channels = ecm.perception.channels(&sensing).to_vec();
            let window = self
                .window(&channels, from, self.tick)
                .ok_or_else(|| self.fail(format!("no sensor window for {sensing}")))?;
            let e = ecm.perception.classify(&sensing, &window).map_err(|err| self.fail(err.to_string()))?;
            let p = ecm.choose_prep(s, e, mode, self.rng);
            *path = Some(WalkPath {
                sensing: s,
                percept: e,
                prep: p,
            });
            self.run_prep(&ecm.preparations[p])?;
        }
        match &skill.basic_behaviour {
            Some(b) => self.run_behaviour(b, &Params::new())?,
            None => self.run_behaviour(super::VOID_BEHAVIOUR, &Params::new())?,
        }
        self.sim
            .predicates
            .evaluate(&skill.predicate, &self.world)
            .map_err(|e| self.fail(e.to_string()))
    }

    pub fn run_prep(&mut self, prep: &PrepAction) -> Result<(), Abort> {
        match prep {
            PrepAction::Void => self.run_behaviour(super::VOID_BEHAVIOUR, &Params::new()),
            PrepAction::Behaviour { behaviour, params } => self.run_behaviour(behaviour, params),
            PrepAction::Skill { skill } => self.run_skill_call(skill),
            PrepAction::Program { program, .. } => super::program::run_node(self, program),
        }
    }

    /// Runs a nested skill greedily and aborts if it does not succeed.
    pub fn run_skill_call(&mut self, id: &str) -> Result<(), Abort> {
        let skill = self.registry.skill(id).map_err(|e| self.fail(e.to_string()))?;
        let mut path = None;
        if self.run_skill(&skill, WalkMode::Greedy, &mut path)? {
            Ok(())
        } else {
            Err(Abort {
                tick: self.tick.saturating_sub(1),
                reason: AbortReason::SkillFailed { skill: id.to_string() },
            })
        }
    }

    /// Closes the recording and returns the final state and matrices.
    pub fn finish(mut self) -> Recording {
        if self.tick > 0 {
            self.profiler.close_all(self.tick - 1);
        }
        let sensor = self.recorder.close().expect("every column fully sampled");
        let functions = self.sim.functions.ids().to_vec();
        let profile = self
            .profiler
            .to_profile(&functions, sensor.ticks())
            .expect("profiled functions are registered");
        Recording {
            world: self.world,
            sensor,
            profile,
            trace: self.profiler.into_trace(),
            start_clock: self.start_clock,
        }
    }
}
