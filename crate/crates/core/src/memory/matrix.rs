//! Per-execution sensor and call-profile matrices.
//!
//! Both matrices are stored row-major: one row per sensor channel (resp. per
//! instrumented function), one column per tick of the execution.

use serde::{Deserialize, Serialize};

use super::blob::{self, ElementWidth};
use super::MemoryError;

/// Sensor values `m_i(t)`, `M` channels by `T` ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorMatrix {
    channels: Vec<String>,
    ticks: usize,
    values: Vec<f64>,
    pub tick_length: f64,
}

impl SensorMatrix {
    pub fn new(channels: Vec<String>, ticks: usize, values: Vec<f64>) -> Result<Self, MemoryError> {
        if values.len() != channels.len() * ticks {
            return Err(MemoryError::Shape {
                expected: channels.len() * ticks,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(MemoryError::MissingCells);
        }
        Ok(SensorMatrix {
            channels,
            ticks,
            values,
            tick_length: 1.0,
        })
    }

    pub fn empty(channels: Vec<String>) -> Self {
        SensorMatrix {
            channels,
            ticks: 0,
            values: Vec::new(),
            tick_length: 1.0,
        }
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn rows(&self) -> usize {
        self.channels.len()
    }

    pub fn ticks(&self) -> usize {
        self.ticks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, tick: usize) -> f64 {
        self.values[row * self.ticks + tick]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.ticks..(row + 1) * self.ticks]
    }

    pub fn column(&self, tick: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.get(r, tick)).collect()
    }

    pub fn row_index(&self, channel: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == channel)
    }

    /// Sub-matrix restricted to the named channels (in the given order) and a tick range.
    pub fn select(&self, channels: &[String], from: usize, to: usize) -> Result<SensorMatrix, MemoryError> {
        if from > to || to > self.ticks {
            return Err(MemoryError::TickRange { from, to, ticks: self.ticks });
        }
        let mut values = Vec::with_capacity(channels.len() * (to - from));
        for ch in channels {
            let r = self
                .row_index(ch)
                .ok_or_else(|| MemoryError::UnknownChannel(ch.clone()))?;
            values.extend_from_slice(&self.row(r)[from..to]);
        }
        Ok(SensorMatrix {
            channels: channels.to_vec(),
            ticks: to - from,
            values,
            tick_length: self.tick_length,
        })
    }

    /// Copy extended to `ticks` columns by repeating the final column.
    pub fn padded_to(&self, ticks: usize) -> SensorMatrix {
        if ticks <= self.ticks || self.ticks == 0 {
            return self.clone();
        }
        let mut values = Vec::with_capacity(self.rows() * ticks);
        for r in 0..self.rows() {
            let row = self.row(r);
            values.extend_from_slice(row);
            let last = row[row.len() - 1];
            values.extend(std::iter::repeat_n(last, ticks - self.ticks));
        }
        SensorMatrix {
            channels: self.channels.clone(),
            ticks,
            values,
            tick_length: self.tick_length,
        }
    }

    pub fn to_blob(&self) -> Vec<u8> {
        blob::encode(&self.channels, self.ticks, ElementWidth::F64, |out| {
            for v in &self.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        })
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self, MemoryError> {
        let decoded = blob::decode(bytes, ElementWidth::F64)?;
        let values = decoded
            .cells
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        SensorMatrix::new(decoded.row_names, decoded.cols, values)
    }
}

/// Active-instance counts `fc_i(t)`, `F` functions by `T` ticks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallProfileMatrix {
    functions: Vec<String>,
    ticks: usize,
    counts: Vec<u32>,
}

impl CallProfileMatrix {
    pub fn new(functions: Vec<String>, ticks: usize, counts: Vec<u32>) -> Result<Self, MemoryError> {
        if counts.len() != functions.len() * ticks {
            return Err(MemoryError::Shape {
                expected: functions.len() * ticks,
                actual: counts.len(),
            });
        }
        Ok(CallProfileMatrix { functions, ticks, counts })
    }

    pub fn zeros(functions: Vec<String>, ticks: usize) -> Self {
        let counts = vec![0; functions.len() * ticks];
        CallProfileMatrix { functions, ticks, counts }
    }

    pub fn functions(&self) -> &[String] {
        &self.functions
    }

    pub fn rows(&self) -> usize {
        self.functions.len()
    }

    pub fn ticks(&self) -> usize {
        self.ticks
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, row: usize, tick: usize) -> u32 {
        self.counts[row * self.ticks + tick]
    }

    pub(crate) fn add(&mut self, row: usize, tick: usize, delta: u32) {
        self.counts[row * self.ticks + tick] += delta;
    }

    pub fn row(&self, row: usize) -> &[u32] {
        &self.counts[row * self.ticks..(row + 1) * self.ticks]
    }

    pub fn row_index(&self, function: &str) -> Option<usize> {
        self.functions.iter().position(|f| f == function)
    }

    /// Last tick at which `function` had an active instance.
    pub fn last_active(&self, function: &str) -> Option<usize> {
        let r = self.row_index(function)?;
        self.row(r).iter().rposition(|&c| c > 0)
    }

    pub fn was_active(&self, function: &str) -> bool {
        self.last_active(function).is_some()
    }

    pub fn padded_to(&self, ticks: usize) -> CallProfileMatrix {
        if ticks <= self.ticks || self.ticks == 0 {
            return self.clone();
        }
        let mut counts = Vec::with_capacity(self.rows() * ticks);
        for r in 0..self.rows() {
            let row = self.row(r);
            counts.extend_from_slice(row);
            counts.extend(std::iter::repeat_n(row[row.len() - 1], ticks - self.ticks));
        }
        CallProfileMatrix {
            functions: self.functions.clone(),
            ticks,
            counts,
        }
    }

    pub fn to_blob(&self) -> Vec<u8> {
        blob::encode(&self.functions, self.ticks, ElementWidth::U32, |out| {
            for c in &self.counts {
                out.extend_from_slice(&c.to_le_bytes());
            }
        })
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self, MemoryError> {
        let decoded = blob::decode(bytes, ElementWidth::U32)?;
        let counts = decoded
            .cells
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        CallProfileMatrix::new(decoded.row_names, decoded.cols, counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_shape() {
        assert!(SensorMatrix::new(vec!["a".into()], 3, vec![1.0, 2.0]).is_err());
        assert!(CallProfileMatrix::new(vec!["f".into()], 2, vec![1]).is_err());
    }

    #[test]
    fn padding_repeats_final_column() {
        let m = SensorMatrix::new(vec!["a".into(), "b".into()], 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = m.padded_to(4);
        assert_eq!(p.row(0), &[1.0, 2.0, 2.0, 2.0]);
        assert_eq!(p.row(1), &[3.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn select_extracts_rows_and_window() {
        let m = SensorMatrix::new(
            vec!["a".into(), "b".into()],
            3,
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        )
        .unwrap();
        let s = m.select(&["b".to_string()], 1, 3).unwrap();
        assert_eq!(s.values(), &[5.0, 6.0]);
        assert!(m.select(&["zz".to_string()], 0, 1).is_err());
    }

    #[test]
    fn last_active_finds_final_nonzero() {
        let p = CallProfileMatrix::new(vec!["f".into(), "g".into()], 4, vec![0, 1, 1, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(p.last_active("f"), Some(2));
        assert_eq!(p.last_active("g"), None);
        assert_eq!(p.last_active("h"), None);
    }
}
