//! Success-conditioned models of one skill: the measurement observation
//! model over sensor matrices and the functional profiling fingerprint over
//! call-profile matrices.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{DiagnosisConfig, DiagnosisError};
use crate::memory::{CallProfileMatrix, ExecutionRecord, SensorMatrix};

/// Per-cell mean and variance (floored) over equally long sequences.
fn moments(samples: &[Vec<f64>], floor: f64) -> (Vec<f64>, Vec<f64>) {
    let width = samples[0].len();
    let mut mean = vec![0.0; width];
    let mut squares = vec![0.0; width];
    for (k, s) in samples.iter().enumerate() {
        let count = (k + 1) as f64;
        for ((m, q), x) in mean.iter_mut().zip(squares.iter_mut()).zip(s) {
            let delta = x - *m;
            *m += delta / count;
            *q += delta * (x - *m);
        }
    }
    let dof = samples.len().saturating_sub(1).max(1) as f64;
    let var = squares.iter().map(|q| (q / dof).max(floor)).collect();
    (mean, var)
}

fn successful<'a>(
    skill: &str,
    records: &'a [ExecutionRecord],
    config: &DiagnosisConfig,
) -> Result<Vec<&'a ExecutionRecord>, DiagnosisError> {
    let ok: Vec<&ExecutionRecord> = records.iter().filter(|r| r.success).collect();
    if ok.len() < config.min_records {
        return Err(DiagnosisError::InsufficientRecords {
            skill: skill.to_string(),
            found: ok.len(),
            needed: config.min_records,
        });
    }
    Ok(ok)
}

/// Estimated failure tick of an execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailTime {
    /// 0-based tick.
    pub tick: u32,
    /// Set when no tick exceeded the threshold and the last tick was returned.
    pub low_confidence: bool,
}

/// Independent per-tick, per-channel Gaussian model of successful sensor data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mom {
    pub skill: String,
    pub channels: Vec<String>,
    pub ticks: usize,
    /// Row-major `[tick][channel]`.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Threshold on the standardized squared deviation of one column.
    pub tau: f64,
}

impl Mom {
    /// Trains on the successful records; shorter executions are padded with
    /// their final column.
    pub fn train(skill: &str, records: &[ExecutionRecord], config: &DiagnosisConfig) -> Result<Self, DiagnosisError> {
        let ok = successful(skill, records, config)?;
        let channels = ok[0].sensor.channels().to_vec();
        if ok.iter().any(|r| r.sensor.channels() != channels.as_slice()) {
            return Err(DiagnosisError::ChannelMismatch(skill.to_string()));
        }
        let ticks = ok.iter().map(|r| r.sensor.ticks()).max().unwrap_or(0);
        let samples: Vec<Vec<f64>> = ok
            .iter()
            .map(|r| {
                let padded = r.sensor.padded_to(ticks);
                (0..ticks).flat_map(|t| padded.column(t)).collect()
            })
            .collect();
        let (mean, variance) = moments(&samples, config.variance_floor);
        let tau = if channels.is_empty() {
            f64::INFINITY
        } else {
            ChiSquared::new(channels.len() as f64)
                .expect("positive degrees of freedom")
                .inverse_cdf(config.tau_quantile)
        };
        Ok(Mom {
            skill: skill.to_string(),
            channels,
            ticks,
            mean,
            variance,
            tau,
        })
    }

    /// Standardized squared deviation of column `t`; ticks past the model's
    /// horizon compare against its final column.
    pub fn score(&self, sensor: &SensorMatrix, t: usize) -> f64 {
        let m = self.channels.len();
        let row = t.min(self.ticks.saturating_sub(1));
        (0..m)
            .map(|i| {
                let k = row * m + i;
                (sensor.get(i, t) - self.mean[k]).powi(2) / self.variance[k]
            })
            .sum()
    }

    /// Earliest tick whose score exceeds the threshold, or the last tick with
    /// low confidence.
    pub fn estimate_fail_time(&self, sensor: &SensorMatrix) -> Result<FailTime, DiagnosisError> {
        if sensor.channels() != self.channels.as_slice() {
            return Err(DiagnosisError::ChannelMismatch(self.skill.clone()));
        }
        if self.ticks > 0 {
            for t in 0..sensor.ticks() {
                if self.score(sensor, t) > self.tau {
                    return Ok(FailTime {
                        tick: t as u32,
                        low_confidence: false,
                    });
                }
            }
        }
        Ok(FailTime {
            tick: sensor.ticks().saturating_sub(1) as u32,
            low_confidence: true,
        })
    }
}

/// Per-function, per-tick Gaussian over active-instance counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fpf {
    pub skill: String,
    /// Functions active in at least one training execution.
    pub functions: Vec<String>,
    pub ticks: usize,
    /// Row-major `[function][tick]`.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl Fpf {
    pub fn train(skill: &str, records: &[ExecutionRecord], config: &DiagnosisConfig) -> Result<Self, DiagnosisError> {
        let ok = successful(skill, records, config)?;
        let all = ok[0].profile.functions().to_vec();
        let functions: Vec<String> = all
            .iter()
            .filter(|f| ok.iter().any(|r| r.profile.was_active(f)))
            .cloned()
            .collect();
        let ticks = ok.iter().map(|r| r.profile.ticks()).max().unwrap_or(0);
        let samples: Vec<Vec<f64>> = ok
            .iter()
            .map(|r| {
                let padded = r.profile.padded_to(ticks);
                functions
                    .iter()
                    .flat_map(|f| {
                        let row = padded.row_index(f).map(|i| padded.row(i).to_vec()).unwrap_or_else(|| vec![0; ticks]);
                        row.into_iter().map(f64::from)
                    })
                    .collect()
            })
            .collect();
        let (mean, variance) = moments(&samples, config.variance_floor);
        Ok(Fpf {
            skill: skill.to_string(),
            functions,
            ticks,
            mean,
            variance,
        })
    }

    /// Mean absolute standardized deviation of `function`'s profile row over
    /// ticks `0..=until`; zero for functions never seen in training.
    pub fn deviation(&self, profile: &CallProfileMatrix, function: &str, until: usize) -> f64 {
        let Some(fi) = self.functions.iter().position(|f| f == function) else {
            return 0.0;
        };
        if self.ticks == 0 {
            return 0.0;
        }
        let row = profile.row_index(function);
        let until = until.min(profile.ticks().saturating_sub(1));
        let mut total = 0.0;
        for t in 0..=until {
            let count = row.map(|r| profile.get(r, t)).unwrap_or(0) as f64;
            let k = fi * self.ticks + t.min(self.ticks - 1);
            total += (count - self.mean[k]).abs() / self.variance[k].sqrt();
        }
        total / (until + 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::SubjectKind;

    fn record(values: Vec<f64>, ticks: usize, counts: Vec<u32>) -> ExecutionRecord {
        ExecutionRecord {
            id: None,
            subject: "s".into(),
            subject_kind: SubjectKind::Skill,
            start_tick: 0,
            end_tick: ticks as u64,
            success: true,
            sensor: SensorMatrix::new(vec!["a".into(), "b".into()], ticks, values).unwrap(),
            profile: CallProfileMatrix::new(vec!["f".into(), "g".into()], ticks, counts).unwrap(),
            hardware_config: Default::default(),
            situation: None,
            failure: None,
        }
    }

    #[test]
    fn identical_records_give_floor_variance() {
        let r = record(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3, vec![1, 1, 0, 0, 0, 0]);
        let records = vec![r; 20];
        let cfg = DiagnosisConfig::default();
        let mom = Mom::train("s", &records, &cfg).unwrap();
        assert_eq!(mom.mean, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert!(mom.variance.iter().all(|v| *v == cfg.variance_floor));
        let fit = mom.estimate_fail_time(&records[0].sensor).unwrap();
        assert_eq!(fit, FailTime { tick: 2, low_confidence: true });
        let fpf = Fpf::train("s", &records, &cfg).unwrap();
        assert_eq!(fpf.functions, vec!["f".to_string()]);
        assert_eq!(fpf.deviation(&records[0].profile, "f", 2), 0.0);
        assert_eq!(fpf.deviation(&records[0].profile, "g", 2), 0.0);
    }

    #[test]
    fn too_few_records_is_an_error() {
        let r = record(vec![0.0; 6], 3, vec![0; 6]);
        let err = Mom::train("s", &vec![r; 9], &DiagnosisConfig::default()).unwrap_err();
        assert!(matches!(err, DiagnosisError::InsufficientRecords { found: 9, .. }));
    }

    #[test]
    fn earliest_crossing_wins() {
        let r = record(vec![0.0; 10], 5, vec![0; 10]);
        let mom = Mom::train("s", &vec![r; 10], &DiagnosisConfig::default()).unwrap();
        let mut values = vec![0.0; 10];
        values[3] = 1.0;
        values[4] = 1.0;
        let probe = SensorMatrix::new(vec!["a".into(), "b".into()], 5, values).unwrap();
        assert_eq!(mom.estimate_fail_time(&probe).unwrap().tick, 3);
    }

    #[test]
    fn shorter_records_are_padded_with_final_column() {
        let cfg = DiagnosisConfig::default();
        let mut records = vec![record(vec![1.0, 2.0, 3.0, 4.0], 2, vec![0; 4]); 10];
        records.push(record(vec![1.0, 2.0, 2.0, 3.0, 4.0, 4.0], 3, vec![0; 6]));
        let mom = Mom::train("s", &records, &cfg).unwrap();
        assert_eq!(mom.ticks, 3);
        assert_eq!(mom.mean[4], 2.0);
        assert_eq!(mom.mean[5], 4.0);
    }
}
