//! Life-long experience memory: sensor and call-profile matrices, the
//! tick-resolution profiler, snapshot recording and the relational store.

mod blob;
mod matrix;
mod profile;
mod record;
mod recorder;
mod store;

use thiserror::Error;

pub use blob::{ElementWidth, MAGIC as BLOB_MAGIC, VERSION as BLOB_VERSION};
pub use matrix::{CallProfileMatrix, SensorMatrix};
pub use profile::{CallTrace, EventKind, ProfileEvent, ProfileToken, Profiler};
pub use record::{ExecutionRecord, SubjectKind};
pub use recorder::RecordingSession;
pub use store::{ColumnDefinition, ColumnType, ExecutionFilter, SchemaExtension, Store, TableDefinition};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("matrix shape mismatch: expected {expected} cells, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("matrix has missing cells")]
    MissingCells,
    #[error("tick range {from}..{to} outside 0..{ticks}")]
    TickRange { from: usize, to: usize, ticks: usize },
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("corrupt matrix blob: {0}")]
    CorruptBlob(String),
    #[error("exit for instance {0} without a matching enter")]
    UnmatchedExit(u64),
    #[error("instance {0} was never exited")]
    UnclosedInstance(u64),
    #[error("tick {tick} precedes last tick {last}")]
    NonMonotonicTick { tick: u32, last: u32 },
    #[error("recording session is closed")]
    SessionClosed,
    #[error("invalid execution record: {0}")]
    InvalidRecord(String),
    #[error("executions are append-only")]
    AppendOnly,
    #[error("malformed filter: {0}")]
    MalformedFilter(String),
    #[error("malformed schema extension: {0}")]
    MalformedSchema(String),
    #[error("table {table:?} already owned by {owner:?}")]
    SchemaConflict { table: String, owner: String },
    #[error("schema for {owner:?} is at version {installed}, refusing version {requested}")]
    Downgrade { owner: String, installed: u32, requested: u32 },
    #[error("storage: {0}")]
    Storage(String),
}

impl From<rusqlite::Error> for MemoryError {
    fn from(e: rusqlite::Error) -> Self {
        if let rusqlite::Error::SqliteFailure(_, Some(msg)) = &e {
            if msg.contains("append-only") {
                return MemoryError::AppendOnly;
            }
        }
        MemoryError::Storage(e.to_string())
    }
}

impl From<serde_json::Error> for MemoryError {
    fn from(e: serde_json::Error) -> Self {
        MemoryError::Storage(e.to_string())
    }
}
