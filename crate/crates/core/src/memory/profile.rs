//! Tick-resolution function profiling.
//!
//! Every instrumented call produces an enter and an exit event; the call
//! profile matrix counts, per tick, how many instances of each function are
//! active (inclusive of both the enter and the exit tick).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CallProfileMatrix, MemoryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Enter,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileEvent {
    pub function: String,
    pub instance: u64,
    pub kind: EventKind,
    pub tick: u32,
}

/// Ordered enter/exit log of one execution.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallTrace {
    pub events: Vec<ProfileEvent>,
}

impl CallTrace {
    /// Function ids entered at least once, in first-entry order.
    pub fn functions(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for e in &self.events {
            if e.kind == EventKind::Enter && !seen.contains(&e.function) {
                seen.push(e.function.clone());
            }
        }
        seen
    }

    pub fn contains(&self, function: &str) -> bool {
        self.events.iter().any(|e| e.function == function)
    }

    /// True when every exit closes the most recently opened, still-open instance.
    pub fn is_well_nested(&self) -> bool {
        let mut stack: Vec<(u64, &str)> = Vec::new();
        for e in &self.events {
            match e.kind {
                EventKind::Enter => stack.push((e.instance, &e.function)),
                EventKind::Exit => match stack.pop() {
                    Some((i, f)) if i == e.instance && f == e.function => {}
                    _ => return false,
                },
            }
        }
        stack.is_empty()
    }

    /// Rebuilds the call profile matrix from the event log alone.
    pub fn to_profile(&self, functions: &[String], ticks: usize) -> Result<CallProfileMatrix, MemoryError> {
        let mut open: BTreeMap<u64, (&str, u32)> = BTreeMap::new();
        let mut matrix = CallProfileMatrix::zeros(functions.to_vec(), ticks);
        for e in &self.events {
            match e.kind {
                EventKind::Enter => {
                    open.insert(e.instance, (&e.function, e.tick));
                }
                EventKind::Exit => {
                    let (f, start) = open
                        .remove(&e.instance)
                        .ok_or(MemoryError::UnmatchedExit(e.instance))?;
                    add_interval(&mut matrix, f, start, e.tick)?;
                }
            }
        }
        if let Some((instance, _)) = open.into_iter().next() {
            return Err(MemoryError::UnclosedInstance(instance));
        }
        Ok(matrix)
    }
}

fn add_interval(matrix: &mut CallProfileMatrix, f: &str, start: u32, end: u32) -> Result<(), MemoryError> {
    let row = matrix
        .row_index(f)
        .ok_or_else(|| MemoryError::UnknownFunction(f.to_string()))?;
    if end as usize >= matrix.ticks() || start > end {
        return Err(MemoryError::TickRange {
            from: start as usize,
            to: end as usize,
            ticks: matrix.ticks(),
        });
    }
    for t in start..=end {
        matrix.add(row, t as usize, 1);
    }
    Ok(())
}

/// Handle for one active function instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ProfileToken(u64);

#[derive(Debug, Default)]
pub struct Profiler {
    next_instance: u64,
    open: BTreeMap<u64, (String, u32)>,
    last_tick: u32,
    trace: CallTrace,
}

impl Profiler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn profile_enter(&mut self, function: &str, tick: u32) -> Result<ProfileToken, MemoryError> {
        self.check_tick(tick)?;
        let instance = self.next_instance;
        self.next_instance += 1;
        self.open.insert(instance, (function.to_string(), tick));
        self.trace.events.push(ProfileEvent {
            function: function.to_string(),
            instance,
            kind: EventKind::Enter,
            tick,
        });
        Ok(ProfileToken(instance))
    }

    pub fn profile_exit(&mut self, token: ProfileToken, tick: u32) -> Result<(), MemoryError> {
        let (function, start) = self
            .open
            .get(&token.0)
            .cloned()
            .ok_or(MemoryError::UnmatchedExit(token.0))?;
        if tick < start {
            return Err(MemoryError::NonMonotonicTick { tick, last: start });
        }
        self.check_tick(tick)?;
        self.open.remove(&token.0);
        self.trace.events.push(ProfileEvent {
            function,
            instance: token.0,
            kind: EventKind::Exit,
            tick,
        });
        Ok(())
    }

    fn check_tick(&mut self, tick: u32) -> Result<(), MemoryError> {
        if tick < self.last_tick {
            return Err(MemoryError::NonMonotonicTick {
                tick,
                last: self.last_tick,
            });
        }
        self.last_tick = tick;
        Ok(())
    }

    /// Exits every open instance at `tick`, innermost first.
    pub fn close_all(&mut self, tick: u32) {
        let open: Vec<u64> = self.open.keys().rev().copied().collect();
        for instance in open {
            let (function, start) = self.open.remove(&instance).expect("open instance");
            self.trace.events.push(ProfileEvent {
                function,
                instance,
                kind: EventKind::Exit,
                tick: tick.max(start),
            });
        }
        self.last_tick = self.last_tick.max(tick);
    }

    pub fn trace(&self) -> &CallTrace {
        &self.trace
    }

    pub fn into_trace(self) -> CallTrace {
        self.trace
    }

    /// Profile matrix over `functions` for an execution of `ticks` columns.
    pub fn to_profile(&self, functions: &[String], ticks: usize) -> Result<CallProfileMatrix, MemoryError> {
        let mut matrix = CallProfileMatrix::zeros(functions.to_vec(), ticks);
        let mut open: BTreeMap<u64, (&str, u32)> = BTreeMap::new();
        for e in &self.trace.events {
            match e.kind {
                EventKind::Enter => {
                    open.insert(e.instance, (&e.function, e.tick));
                }
                EventKind::Exit => {
                    let (f, start) = open.remove(&e.instance).expect("profiler exits are paired");
                    add_interval(&mut matrix, f, start, e.tick)?;
                }
            }
        }
        // instances still open count as active through the final tick
        if ticks > 0 {
            for (f, start) in open.values() {
                add_interval(&mut matrix, f, *start, ticks as u32 - 1)?;
            }
        }
        Ok(matrix)
    }
}
