//! Snapshot recording session that assembles a sensor matrix column by column.

use std::sync::Arc;

use crate::world::HardwareHandle;

use super::{MemoryError, SensorMatrix};

#[derive(Debug)]
struct Slot {
    hardware: String,
    offset: usize,
    rows: usize,
}

/// Collects one column per tick; each hardware handle fills its own rows.
#[derive(Debug)]
pub struct RecordingSession {
    slots: Vec<Slot>,
    channels: Vec<String>,
    columns: Vec<Vec<f64>>,
    open: bool,
}

impl RecordingSession {
    pub fn open(handles: &[Arc<HardwareHandle>]) -> Self {
        let mut slots = Vec::with_capacity(handles.len());
        let mut channels = Vec::new();
        for h in handles {
            slots.push(Slot {
                hardware: h.name.clone(),
                offset: channels.len(),
                rows: h.row_count(),
            });
            channels.extend(h.row_names());
        }
        RecordingSession {
            slots,
            channels,
            columns: Vec::new(),
            open: true,
        }
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn ticks(&self) -> usize {
        self.columns.len()
    }

    /// Starts the column for `tick`; ticks must arrive in order without gaps.
    pub fn begin_tick(&mut self, tick: u32) -> Result<(), MemoryError> {
        if !self.open {
            return Err(MemoryError::SessionClosed);
        }
        if tick as usize != self.columns.len() {
            return Err(MemoryError::NonMonotonicTick {
                tick,
                last: self.columns.len() as u32,
            });
        }
        self.columns.push(vec![f64::NAN; self.channels.len()]);
        Ok(())
    }

    /// Writes `values` for `handle` into the column of `tick`.
    pub fn record_snapshot(&mut self, handle: &HardwareHandle, values: &[f64], tick: u32) -> Result<(), MemoryError> {
        if !self.open {
            return Err(MemoryError::SessionClosed);
        }
        let slot = self
            .slots
            .iter()
            .find(|s| s.hardware == handle.name)
            .ok_or_else(|| MemoryError::UnknownChannel(handle.name.clone()))?;
        if values.len() != slot.rows {
            return Err(MemoryError::Shape {
                expected: slot.rows,
                actual: values.len(),
            });
        }
        let column = self
            .columns
            .get_mut(tick as usize)
            .ok_or(MemoryError::TickRange {
                from: tick as usize,
                to: tick as usize,
                ticks: 0,
            })?;
        column[slot.offset..slot.offset + slot.rows].copy_from_slice(values);
        Ok(())
    }

    /// Sensor matrix over the columns recorded so far within `[from, to)`.
    pub fn window(&self, channels: &[String], from: usize, to: usize) -> Result<SensorMatrix, MemoryError> {
        if from > to || to > self.columns.len() {
            return Err(MemoryError::TickRange {
                from,
                to,
                ticks: self.columns.len(),
            });
        }
        let mut values = Vec::with_capacity(channels.len() * (to - from));
        for ch in channels {
            let r = self
                .channels
                .iter()
                .position(|c| c == ch)
                .ok_or_else(|| MemoryError::UnknownChannel(ch.clone()))?;
            values.extend(self.columns[from..to].iter().map(|col| col[r]));
        }
        SensorMatrix::new(channels.to_vec(), to - from, values)
    }

    /// Ends the session and returns the complete `M x T` matrix.
    pub fn close(&mut self) -> Result<SensorMatrix, MemoryError> {
        if !self.open {
            return Err(MemoryError::SessionClosed);
        }
        self.open = false;
        let ticks = self.columns.len();
        let mut values = Vec::with_capacity(self.channels.len() * ticks);
        for r in 0..self.channels.len() {
            values.extend(self.columns.iter().map(|col| col[r]));
        }
        SensorMatrix::new(self.channels.clone(), ticks, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::HardwareRegistry;

    #[test]
    fn ten_ticks_three_channels() {
        let reg = HardwareRegistry::default();
        let cam = reg.acquire("camera").unwrap();
        let hand = reg.acquire("left_hand").unwrap();
        // camera has 2 rows, hand 2 rows; use a single 3-row layout via arm
        let arm = reg.acquire("left_arm").unwrap();
        let mut s = RecordingSession::open(&[Arc::clone(&arm)]);
        for t in 0..10 {
            s.begin_tick(t).unwrap();
            s.record_snapshot(&arm, &[1.0, 2.0, 3.0, 4.0], t).unwrap();
        }
        let m = s.close().unwrap();
        assert_eq!((m.rows(), m.ticks()), (4, 10));

        let mut s = RecordingSession::open(&[cam.clone(), hand.clone()]);
        s.begin_tick(0).unwrap();
        s.record_snapshot(&cam, &[1.0, 2.0], 0).unwrap();
        assert!(matches!(s.close(), Err(MemoryError::MissingCells)));
    }

    #[test]
    fn no_hardware_gives_zero_rows() {
        let mut s = RecordingSession::open(&[]);
        for t in 0..5 {
            s.begin_tick(t).unwrap();
        }
        let m = s.close().unwrap();
        assert_eq!((m.rows(), m.ticks()), (0, 5));
    }

    #[test]
    fn snapshot_after_close_errors() {
        let reg = HardwareRegistry::default();
        let cam = reg.acquire("camera").unwrap();
        let mut s = RecordingSession::open(&[cam.clone()]);
        s.close().unwrap();
        assert!(matches!(
            s.record_snapshot(&cam, &[0.0, 0.0], 0),
            Err(MemoryError::SessionClosed)
        ));
    }
}
