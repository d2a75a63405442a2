//! Behaviours, skills, visual programs and their execution.

mod behaviour;
pub mod catalog;
mod exec;
mod primitives;
mod program;
mod registry;

use thiserror::Error;

use crate::memory::MemoryError;
use crate::world::WorldError;

pub use behaviour::{
    tree_functions, tree_span, Behaviour, BehaviourCategory, BehaviourDescriptor, CallNode, ParamSpec, ParamType,
    ParamValue, Params,
};
pub use exec::{Abort, AbortReason, ExecContext, Recording};
pub use primitives::{
    primitives, waypoint_segment_tree, Primitive, APPROACH_HEIGHT, JOINT_PTP_HEIGHT, MOTION_TICKS, SENSING_ACTIONS,
    SENSING_TICKS, VOID_BEHAVIOUR,
};
pub use program::{
    run_node, static_profile, validate, Diagnostic, Node, ProgramAst, ProgramBehaviour, AST_VERSION, MAX_LOOP_COUNT,
};
pub use registry::{PlayingSpec, Registry, Skill};

#[derive(Debug, Error)]
pub enum SkillError {
    #[error("unknown behaviour {0:?}")]
    UnknownBehaviour(String),
    #[error("behaviour {0:?} is already registered")]
    DuplicateBehaviour(String),
    #[error("unknown skill {0:?}")]
    UnknownSkill(String),
    #[error("skill {0:?} is already registered")]
    DuplicateSkill(String),
    #[error("unknown hardware {0:?}")]
    UnknownHardware(String),
    #[error("unknown predicate {0:?}")]
    UnknownPredicate(String),
    #[error("behaviour {behaviour:?} calls unregistered function {function:?}")]
    UnknownFunction { behaviour: String, function: String },
    #[error("invalid descriptor {0:?}: {1}")]
    InvalidDescriptor(String, String),
    #[error("invalid skill {0:?}: {1}")]
    InvalidSkill(String, String),
    #[error("parameters of {behaviour:?}: {message}")]
    ParamSchema { behaviour: String, message: String },
    #[error("program is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidProgram(Vec<Diagnostic>),
    #[error("behaviour {0:?} is not a program")]
    NotAProgram(String),
    #[error("malformed program document: {0}")]
    Parse(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}
