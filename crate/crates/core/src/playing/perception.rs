//! Perceptual-state classification: nearest centroid over per-channel mean
//! and standard deviation of a sensing window.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{HapticDatabase, PlayingError};
use crate::memory::SensorMatrix;

/// Per-channel `(mean, population std)` pairs, row by row.
pub fn features(m: &SensorMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.rows());
    for r in 0..m.rows() {
        let row = m.row(r);
        if row.is_empty() {
            out.extend([0.0, 0.0]);
            continue;
        }
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        out.extend([mean, var.sqrt()]);
    }
    out
}

fn distance2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Classifier of one sensing action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub channels: Vec<String>,
    pub labels: Vec<String>,
    pub centroids: Vec<Vec<f64>>,
    /// Accuracy on the held-out split.
    pub accuracy: f64,
}

impl Classifier {
    /// Nearest centroid, lowest index on ties.
    pub fn predict(&self, m: &SensorMatrix) -> Result<usize, PlayingError> {
        let window = m
            .select(&self.channels, 0, m.ticks())
            .map_err(PlayingError::Memory)?;
        Ok(self.predict_features(&features(&window)))
    }

    fn predict_features(&self, f: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = distance2(f, c);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

/// One classifier per sensing action.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerceptualModel {
    pub classifiers: BTreeMap<String, Classifier>,
}

impl PerceptualModel {
    pub fn insert(&mut self, sensing: &str, classifier: Classifier) {
        self.classifiers.insert(sensing.to_string(), classifier);
    }

    fn classifier(&self, sensing: &str) -> Result<&Classifier, PlayingError> {
        self.classifiers
            .get(sensing)
            .ok_or_else(|| PlayingError::UnknownSensing(sensing.to_string()))
    }

    pub fn labels(&self, sensing: &str) -> Result<&[String], PlayingError> {
        Ok(&self.classifier(sensing)?.labels)
    }

    /// Channels the classifier of `sensing` reads; empty when untrained.
    pub fn channels(&self, sensing: &str) -> &[String] {
        self.classifiers.get(sensing).map(|c| c.channels.as_slice()).unwrap_or(&[])
    }

    pub fn accuracy(&self, sensing: &str) -> Result<f64, PlayingError> {
        Ok(self.classifier(sensing)?.accuracy)
    }

    /// Perceptual state index of a sensing window.
    pub fn classify(&self, sensing: &str, window: &SensorMatrix) -> Result<usize, PlayingError> {
        self.classifier(sensing)?.predict(window)
    }

    /// Trains one classifier per sensing action with a stratified holdout:
    /// `holdout_fraction` of each label's entries (at least one, when the
    /// label has two or more) is kept aside for the reported accuracy.
    pub fn train(db: &HapticDatabase, holdout_fraction: f64, rng: &mut impl Rng) -> Result<Self, PlayingError> {
        if !(holdout_fraction > 0.0 && holdout_fraction <= 0.5) {
            return Err(PlayingError::InvalidConfig("holdout fraction must lie in (0, 0.5]".into()));
        }
        let mut model = PerceptualModel::default();
        for sensing in db.sensing_actions() {
            let labels = db.labels(&sensing);
            if labels.len() < 2 {
                return Err(PlayingError::InsufficientLabels {
                    sensing,
                    labels: labels.len(),
                });
            }
            let entries: Vec<_> = db.entries.iter().filter(|e| e.sensing == sensing).collect();
            let channels = entries[0].sensor.channels().to_vec();
            let mut train: Vec<(usize, Vec<f64>)> = Vec::new();
            let mut test: Vec<(usize, Vec<f64>)> = Vec::new();
            for (li, label) in labels.iter().enumerate() {
                let mut group: Vec<Vec<f64>> = entries
                    .iter()
                    .filter(|e| &e.label == label)
                    .map(|e| e.sensor.select(&channels, 0, e.sensor.ticks()).map(|m| features(&m)))
                    .collect::<Result<_, _>>()?;
                group.shuffle(rng);
                let held = if group.len() >= 2 {
                    ((group.len() as f64 * holdout_fraction).round() as usize).clamp(1, group.len() - 1)
                } else {
                    0
                };
                for (i, f) in group.into_iter().enumerate() {
                    if i < held {
                        test.push((li, f));
                    } else {
                        train.push((li, f));
                    }
                }
            }
            let width = 2 * channels.len();
            let mut centroids = vec![vec![0.0; width]; labels.len()];
            let mut counts = vec![0usize; labels.len()];
            for (li, f) in &train {
                counts[*li] += 1;
                for (c, x) in centroids[*li].iter_mut().zip(f) {
                    *c += x;
                }
            }
            for (c, n) in centroids.iter_mut().zip(&counts) {
                c.iter_mut().for_each(|x| *x /= (*n).max(1) as f64);
            }
            let mut classifier = Classifier {
                channels,
                labels,
                centroids,
                accuracy: 0.0,
            };
            let eval = if test.is_empty() { &train } else { &test };
            let correct = eval.iter().filter(|(li, f)| classifier.predict_features(f) == *li).count();
            classifier.accuracy = correct as f64 / eval.len() as f64;
            model.insert(&sensing, classifier);
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_are_mean_and_std() {
        let m = SensorMatrix::new(vec!["a".into(), "b".into()], 4, vec![1.0, 1.0, 3.0, 3.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(features(&m), vec![2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn nearest_centroid_breaks_ties_low() {
        let c = Classifier {
            channels: vec!["a".into()],
            labels: vec!["x".into(), "y".into()],
            centroids: vec![vec![0.0, 0.0], vec![2.0, 0.0]],
            accuracy: 1.0,
        };
        let m = SensorMatrix::new(vec!["a".into()], 2, vec![1.0, 1.0]).unwrap();
        assert_eq!(c.predict(&m).unwrap(), 0);
        let far = SensorMatrix::new(vec!["a".into()], 2, vec![1.8, 1.8]).unwrap();
        assert_eq!(c.predict(&far).unwrap(), 1);
    }
}
