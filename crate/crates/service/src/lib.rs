//! HTTP/SSE service and command-line front end for the skillforge engine.
//!
//! The same [`ops`] functions back both the `/v1` API and the CLI
//! subcommands, so a program run with a given seed produces the same
//! execution record through either door.

pub mod api;
pub mod cli;
pub mod config;
pub mod ops;
pub mod sessions;

use skillforge::diagnosis::DiagnosisError;
use skillforge::memory::MemoryError;
use skillforge::playing::PlayingError;
use skillforge::skill::{Diagnostic, SkillError};
use skillforge::world::WorldError;
use thiserror::Error;

pub use config::{ServiceConfig, CONFIG_ENV, IN_MEMORY_STORE};
pub use ops::AppState;
pub use sessions::{ApiSession, EventEnvelope, EventKind, SessionHub, SessionKind, SessionState};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    Playing(#[from] PlayingError),
    #[error(transparent)]
    Diagnosis(#[from] DiagnosisError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    World(#[from] WorldError),
}

impl ServiceError {
    /// Node-level diagnostics when the error is a rejected program.
    pub fn diagnostics(&self) -> Option<&[Diagnostic]> {
        let skill = match self {
            ServiceError::Skill(e) => e,
            ServiceError::Playing(PlayingError::Skill(e)) => e,
            ServiceError::Diagnosis(DiagnosisError::Skill(e)) => e,
            _ => return None,
        };
        match skill {
            SkillError::InvalidProgram(d) => Some(d),
            _ => None,
        }
    }
}
