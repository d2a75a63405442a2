//! Long-running API sessions and their ordered event logs.

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::watch;

use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionKind {
    ProgramRun,
    Playing,
    Diagnosis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Pending,
    Running,
    Done,
    Failed,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Done | SessionState::Failed)
    }

    /// Whether `self → next` is a legal transition.
    pub fn can_become(self, next: SessionState) -> bool {
        matches!(
            (self, next),
            (SessionState::Pending, SessionState::Running)
                | (SessionState::Running, SessionState::Done)
                | (SessionState::Running, SessionState::Failed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    EpisodeResult,
    WalkPath,
    BlameSnapshot,
    ExecutionFinished,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::EpisodeResult => "episode-result",
            EventKind::WalkPath => "walk-path",
            EventKind::BlameSnapshot => "blame-snapshot",
            EventKind::ExecutionFinished => "execution-finished",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEnvelope {
    pub session: String,
    /// Starts at 1 and increases by one per event.
    pub sequence: u64,
    pub kind: EventKind,
    pub payload: Value,
}

/// Public view of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSession {
    pub id: String,
    pub kind: SessionKind,
    pub state: SessionState,
    /// Skill, program or strategy the session works on.
    pub subject: String,
    /// Seed of every random decision in the session.
    pub seed: u64,
    /// Sequence number of the latest event, 0 before the first.
    pub cursor: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug)]
struct Entry {
    session: ApiSession,
    events: Vec<EventEnvelope>,
    cursor: watch::Sender<u64>,
}

/// Registry of sessions. Each session's events can be read by any number of
/// subscribers, from any cursor.
#[derive(Debug, Default)]
pub struct SessionHub {
    entries: Mutex<BTreeMap<String, Entry>>,
    created: Mutex<u64>,
}

impl SessionHub {
    pub fn create(&self, kind: SessionKind, subject: &str, seed: u64) -> String {
        let id = {
            let mut n = self.created.lock().expect("session counter");
            *n += 1;
            format!("s{}", *n)
        };
        let session = ApiSession {
            id: id.clone(),
            kind,
            state: SessionState::Pending,
            subject: subject.to_string(),
            seed,
            cursor: 0,
            result: None,
            error: None,
        };
        let entry = Entry {
            session,
            events: Vec::new(),
            cursor: watch::Sender::new(0),
        };
        self.entries.lock().expect("session table").insert(id.clone(), entry);
        id
    }

    fn with_entry<T>(&self, id: &str, f: impl FnOnce(&mut Entry) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let mut entries = self.entries.lock().expect("session table");
        let entry = entries
            .get_mut(id)
            .ok_or_else(|| ServiceError::NotFound(format!("session {id:?}")))?;
        f(entry)
    }

    fn transition(entry: &mut Entry, next: SessionState) -> Result<(), ServiceError> {
        if !entry.session.state.can_become(next) {
            return Err(ServiceError::BadRequest(format!(
                "session {} cannot move from {:?} to {next:?}",
                entry.session.id, entry.session.state
            )));
        }
        entry.session.state = next;
        Ok(())
    }

    fn push(entry: &mut Entry, kind: EventKind, payload: Value) -> u64 {
        let sequence = entry.events.len() as u64 + 1;
        entry.events.push(EventEnvelope {
            session: entry.session.id.clone(),
            sequence,
            kind,
            payload,
        });
        entry.session.cursor = sequence;
        entry.cursor.send_replace(sequence);
        sequence
    }

    pub fn start(&self, id: &str) -> Result<(), ServiceError> {
        self.with_entry(id, |e| Self::transition(e, SessionState::Running))
    }

    /// Appends an event to a running session and wakes its subscribers.
    pub fn publish(&self, id: &str, kind: EventKind, payload: Value) -> Result<u64, ServiceError> {
        self.with_entry(id, |e| {
            if e.session.state != SessionState::Running {
                return Err(ServiceError::BadRequest(format!("session {id} is not running")));
            }
            Ok(Self::push(e, kind, payload))
        })
    }

    /// Ends a session with its terminal `execution-finished` event.
    pub fn finish(&self, id: &str, outcome: Result<Value, String>) -> Result<(), ServiceError> {
        self.with_entry(id, |e| {
            let (state, payload) = match &outcome {
                Ok(result) => (SessionState::Done, serde_json::json!({ "state": "done", "result": result })),
                Err(error) => (SessionState::Failed, serde_json::json!({ "state": "failed", "error": error })),
            };
            Self::transition(e, state)?;
            match outcome {
                Ok(result) => e.session.result = Some(result),
                Err(error) => e.session.error = Some(error),
            }
            Self::push(e, EventKind::ExecutionFinished, payload);
            Ok(())
        })
    }

    pub fn get(&self, id: &str) -> Option<ApiSession> {
        self.entries.lock().expect("session table").get(id).map(|e| e.session.clone())
    }

    pub fn list(&self) -> Vec<ApiSession> {
        self.entries.lock().expect("session table").values().map(|e| e.session.clone()).collect()
    }

    /// Events with a sequence number above `after`, and whether the session
    /// has ended.
    pub fn events_after(&self, id: &str, after: u64) -> Result<(Vec<EventEnvelope>, bool), ServiceError> {
        self.with_entry(id, |e| {
            let start = (after as usize).min(e.events.len());
            Ok((e.events[start..].to_vec(), e.session.state.is_terminal()))
        })
    }

    /// Receiver that changes whenever the session publishes an event.
    pub fn subscribe(&self, id: &str) -> Result<watch::Receiver<u64>, ServiceError> {
        self.with_entry(id, |e| Ok(e.cursor.subscribe()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions_are_forward_only() {
        use SessionState::*;
        let all = [Pending, Running, Done, Failed];
        let legal: Vec<_> = all
            .iter()
            .flat_map(|a| all.iter().map(move |b| (*a, *b)))
            .filter(|(a, b)| a.can_become(*b))
            .collect();
        assert_eq!(legal, vec![(Pending, Running), (Running, Done), (Running, Failed)]);
    }

    #[test]
    fn events_are_gapless_and_end_with_finish() {
        let hub = SessionHub::default();
        let id = hub.create(SessionKind::Playing, "book_grasping", 42);
        assert!(hub.publish(&id, EventKind::EpisodeResult, Value::Null).is_err());
        hub.start(&id).unwrap();
        for _ in 0..3 {
            hub.publish(&id, EventKind::EpisodeResult, Value::Null).unwrap();
        }
        hub.finish(&id, Ok(Value::Bool(true))).unwrap();
        assert!(hub.finish(&id, Ok(Value::Null)).is_err());
        let (events, done) = hub.events_after(&id, 0).unwrap();
        assert!(done);
        assert_eq!(events.iter().map(|e| e.sequence).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(events.last().unwrap().kind, EventKind::ExecutionFinished);
        let (tail, _) = hub.events_after(&id, 2).unwrap();
        assert_eq!(tail.len(), 2);
        assert_eq!(hub.get(&id).unwrap().cursor, 4);
        assert_eq!(hub.get(&id).unwrap().state, SessionState::Done);
    }
}
