//! Deterministic tabletop simulation: world state, scenarios, hardware,
//! sensors, success predicates and software-fault injection.

mod catalog;
mod faults;
mod hardware;
mod predicates;
mod sensors;
mod state;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{HeightSpec, ObjectSpec, PositionSpec, Sampled, ScenarioCatalog, ScenarioSpec};
pub use faults::{FaultMode, FaultRegistry, FaultSpec, FunctionRegistry, INSTRUMENTED_FUNCTIONS};
pub use hardware::{
    ChannelDescriptor, HardwareHandle, HardwareKind, HardwareLease, HardwareRegistry, HardwareSpec,
};
pub use predicates::{
    PredicateFn, PredicateRegistry, FRONT_POSITION, PLACEMENT_TOLERANCE, SHELF_POSITION,
};
pub use sensors::{SensorModel, Stimulus, DEFAULT_NOISE_SIGMA, SLIDING_ORIENTATION_STEP};
pub use state::{
    Attribute, ObjectKind, Orientation, ScenarioId, SimObject, WorldState, HOME_POSE, WORKSPACE_SIZE,
};
pub(crate) use state::{clamp_to_workspace, planar_distance};

/// Random generator used for every stochastic decision in the engine.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("rotation by {0} degrees is not a multiple of 90")]
    InvalidAngle(i32),
    #[error("invalid attribute: {0}")]
    InvalidAttribute(String),
    #[error("world invariant violated: {0}")]
    Invariant(String),
    #[error("scenario catalog: {0}")]
    Catalog(String),
    #[error("unknown hardware {0:?}")]
    UnknownHardware(String),
    #[error("hardware {0:?} is busy")]
    HardwareBusy(String),
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("invalid fault: {0}")]
    InvalidFault(String),
    #[error("unknown predicate {0:?}")]
    UnknownPredicate(String),
}

/// Reproducible description of a starting situation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Situation {
    pub scenario: ScenarioId,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the sampled value of the scenario's situation attribute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<Attribute>,
}

impl Situation {
    pub fn new(scenario: ScenarioId, seed: u64) -> Self {
        Situation {
            scenario,
            seed,
            attribute: None,
        }
    }

    pub fn with_attribute(scenario: ScenarioId, seed: u64, attribute: Attribute) -> Self {
        Situation {
            scenario,
            seed,
            attribute: Some(attribute),
        }
    }

    pub fn instantiate(&self, catalog: &ScenarioCatalog) -> Result<WorldState, WorldError> {
        let mut world = catalog.create_world(self.scenario, self.seed)?;
        if let Some(a) = self.attribute {
            world.set_situation_attribute(a)?;
        }
        Ok(world)
    }

    pub fn label(&self) -> String {
        match self.attribute {
            Some(a) => format!("{}:{}", self.scenario, a.label()),
            None => format!("{}#{}", self.scenario, self.seed),
        }
    }
}

/// Everything the engine needs to simulate the world, shared across executions.
#[derive(Debug, Default)]
pub struct Simulator {
    pub catalog: ScenarioCatalog,
    pub hardware: HardwareRegistry,
    pub functions: FunctionRegistry,
    pub faults: FaultRegistry,
    pub predicates: PredicateRegistry,
    pub sensors: SensorModel,
}

impl Simulator {
    pub fn with_noise(noise_sigma: f64) -> Self {
        Simulator {
            sensors: SensorModel { noise_sigma },
            ..Simulator::default()
        }
    }

    pub fn create_world(&self, scenario: ScenarioId, seed: u64) -> Result<WorldState, WorldError> {
        self.catalog.create_world(scenario, seed)
    }

    pub fn acquire_hardware(&self, name: &str) -> Result<std::sync::Arc<HardwareHandle>, WorldError> {
        self.hardware.acquire(name)
    }

    pub fn inject_fault(&self, spec: FaultSpec) -> Result<(), WorldError> {
        self.faults.inject(spec, &self.functions)
    }

    pub fn clear_faults(&self) {
        self.faults.clear();
    }

    pub fn read_success_ground_truth(&self, world: &WorldState, predicate: &str) -> Result<bool, WorldError> {
        self.predicates.evaluate(predicate, world)
    }
}
