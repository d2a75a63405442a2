//! One persisted execution: the observation pair plus its context.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CallProfileMatrix, MemoryError, SensorMatrix};
use crate::world::Situation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectKind {
    Behaviour,
    Skill,
    Program,
    SensingAction,
}

impl SubjectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SubjectKind::Behaviour => "behaviour",
            SubjectKind::Skill => "skill",
            SubjectKind::Program => "program",
            SubjectKind::SensingAction => "sensing_action",
        }
    }

    pub fn parse(s: &str) -> Option<SubjectKind> {
        match s {
            "behaviour" => Some(SubjectKind::Behaviour),
            "skill" => Some(SubjectKind::Skill),
            "program" => Some(SubjectKind::Program),
            "sensing_action" => Some(SubjectKind::SensingAction),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    /// Assigned by the store on persistence.
    pub id: Option<i64>,
    pub subject: String,
    pub subject_kind: SubjectKind,
    pub start_tick: u64,
    pub end_tick: u64,
    pub success: bool,
    pub sensor: SensorMatrix,
    pub profile: CallProfileMatrix,
    pub hardware_config: BTreeSet<String>,
    pub situation: Option<Situation>,
    /// Why the execution aborted, if it did.
    pub failure: Option<String>,
}

impl ExecutionRecord {
    pub fn ticks(&self) -> usize {
        self.sensor.ticks()
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        if self.end_tick < self.start_tick {
            return Err(MemoryError::InvalidRecord(format!(
                "end tick {} before start tick {}",
                self.end_tick, self.start_tick
            )));
        }
        if self.sensor.ticks() != self.profile.ticks() {
            return Err(MemoryError::InvalidRecord(format!(
                "sensor has {} ticks but profile has {}",
                self.sensor.ticks(),
                self.profile.ticks()
            )));
        }
        if self.subject.is_empty() {
            return Err(MemoryError::InvalidRecord("empty subject".into()));
        }
        Ok(())
    }
}
