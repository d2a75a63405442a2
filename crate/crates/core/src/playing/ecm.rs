//! The episodic and compositional memory: a five-layer clip network whose
//! edge h-values encode the skill's policy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, choose, PerceptualModel, PlayingError, PrepAction, WalkMode, WalkPath};

pub const ECM_VERSION: u32 = 1;

/// Layers: skill root, sensing actions, perceptual states per sensing
/// action, preparatory actions, basic behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecm {
    pub version: u32,
    pub skill: String,
    pub sensing: Vec<String>,
    pub perception: PerceptualModel,
    pub preparations: Vec<PrepAction>,
    pub basic: String,
    pub h_min: f64,
    /// Root to sensing action.
    pub h_sensing: Vec<f64>,
    /// `[sensing][percept][prep]`: perceptual state to preparatory action.
    pub h_prep: Vec<Vec<Vec<f64>>>,
    /// Preparatory action to basic behaviour.
    pub h_basic: Vec<f64>,
}

fn normalized(h: &[f64]) -> Vec<f64> {
    let total: f64 = h.iter().sum();
    h.iter().map(|x| x / total).collect()
}

impl Ecm {
    /// A fresh ECM with every h-value at `h_min`; `Void` is appended to the
    /// preparations when missing.
    pub fn build(
        skill: &str,
        sensing: Vec<String>,
        perception: PerceptualModel,
        mut preparations: Vec<PrepAction>,
        basic: &str,
        h_min: f64,
    ) -> Result<Self, PlayingError> {
        if sensing.is_empty() {
            return Err(PlayingError::EmptyLayer("sensing action"));
        }
        if preparations.is_empty() {
            return Err(PlayingError::EmptyLayer("preparatory behaviour"));
        }
        if !(h_min > 0.0 && h_min.is_finite()) {
            return Err(PlayingError::InvalidConfig("h_min must be positive".into()));
        }
        if !preparations.contains(&PrepAction::Void) {
            preparations.push(PrepAction::Void);
        }
        let mut h_prep = Vec::with_capacity(sensing.len());
        for s in &sensing {
            let states = perception.labels(s)?.len();
            h_prep.push(vec![vec![h_min; preparations.len()]; states]);
        }
        Ok(Ecm {
            version: ECM_VERSION,
            skill: skill.into(),
            h_sensing: vec![h_min; sensing.len()],
            h_basic: vec![h_min; preparations.len()],
            sensing,
            perception,
            preparations,
            basic: basic.into(),
            h_min,
            h_prep,
        })
    }

    pub fn percept_labels(&self, sensing: usize) -> &[String] {
        self.perception.labels(&self.sensing[sensing]).unwrap_or(&[])
    }

    pub fn sensing_probabilities(&self) -> Vec<f64> {
        normalized(&self.h_sensing)
    }

    pub fn prep_probabilities(&self, sensing: usize, percept: usize) -> Vec<f64> {
        normalized(&self.h_prep[sensing][percept])
    }

    pub fn basic_probabilities(&self, prep: usize) -> Vec<f64> {
        normalized(&self.h_basic[prep..=prep])
    }

    pub fn choose_sensing(&self, mode: WalkMode, rng: &mut impl Rng) -> usize {
        choose(&self.h_sensing, mode, rng)
    }

    pub fn choose_prep(&self, sensing: usize, percept: usize, mode: WalkMode, rng: &mut impl Rng) -> usize {
        choose(&self.h_prep[sensing][percept], mode, rng)
    }

    /// Number of perceptual-state to preparatory-action edges.
    pub fn prep_edge_count(&self) -> usize {
        self.h_prep.iter().map(|s| s.len() * self.preparations.len()).sum()
    }

    fn check_path(&self, path: &WalkPath) -> Result<(), PlayingError> {
        let mismatch = |m: String| Err(PlayingError::PathMismatch(m));
        if path.sensing >= self.sensing.len() {
            return mismatch(format!("sensing index {}", path.sensing));
        }
        if path.percept >= self.h_prep[path.sensing].len() {
            return mismatch(format!("percept index {}", path.percept));
        }
        if path.prep >= self.preparations.len() {
            return mismatch(format!("preparation index {}", path.prep));
        }
        Ok(())
    }

    /// Projective-simulation update: reward every stochastic edge on a
    /// successful path by `reward`, then damp all h-values towards `h_min`.
    pub fn update(&mut self, path: &WalkPath, success: bool, reward: f64, damping: f64) -> Result<(), PlayingError> {
        self.check_path(path)?;
        if success {
            self.h_sensing[path.sensing] += reward;
            self.h_prep[path.sensing][path.percept][path.prep] += reward;
            self.h_basic[path.prep] += reward;
        }
        if damping > 0.0 {
            let h_min = self.h_min;
            let damp = |h: &mut f64| *h = (*h - damping * (*h - h_min)).max(h_min);
            self.h_sensing.iter_mut().for_each(damp);
            self.h_basic.iter_mut().for_each(damp);
            self.h_prep.iter_mut().flatten().flatten().for_each(damp);
        }
        Ok(())
    }

    /// The greedy path for a given sensing action and perceptual state.
    pub fn greedy_prep(&self, sensing: usize, percept: usize) -> usize {
        argmax(&self.h_prep[sensing][percept])
    }

    pub fn greedy_sensing(&self) -> usize {
        argmax(&self.h_sensing)
    }

    /// Greedy preparation label for each perceptual state of `sensing`.
    pub fn greedy_policy(&self, sensing: &str) -> Vec<(String, String)> {
        let Some(s) = self.sensing.iter().position(|x| x == sensing) else {
            return Vec::new();
        };
        self.percept_labels(s)
            .iter()
            .enumerate()
            .map(|(e, label)| (label.clone(), self.preparations[self.greedy_prep(s, e)].label()))
            .collect()
    }

    /// Versioned clip-and-edge document.
    pub fn to_document(&self) -> EcmDocument {
        let root = format!("skill:{}", self.skill);
        let sensing_clip = |s: &str| format!("sensing:{s}");
        let percept_clip = |s: &str, e: &str| format!("percept:{s}:{e}");
        let prep_labels: Vec<String> = self.preparations.iter().map(PrepAction::label).collect();
        let prep_clip = |p: &str| format!("prep:{p}");
        let basic = format!("basic:{}", self.basic);

        let mut edges = Vec::new();
        let mut percepts = Vec::new();
        let sp = self.sensing_probabilities();
        for (i, s) in self.sensing.iter().enumerate() {
            edges.push(EdgeDocument::new(&root, &sensing_clip(s), self.h_sensing[i], sp[i], true));
            for (e, label) in self.percept_labels(i).iter().enumerate() {
                percepts.push(percept_clip(s, label));
                edges.push(EdgeDocument::new(&sensing_clip(s), &percept_clip(s, label), self.h_min, 1.0, false));
                let pp = self.prep_probabilities(i, e);
                for (p, pl) in prep_labels.iter().enumerate() {
                    edges.push(EdgeDocument::new(
                        &percept_clip(s, label),
                        &prep_clip(pl),
                        self.h_prep[i][e][p],
                        pp[p],
                        true,
                    ));
                }
            }
        }
        for (p, pl) in prep_labels.iter().enumerate() {
            edges.push(EdgeDocument::new(&prep_clip(pl), &basic, self.h_basic[p], 1.0, true));
        }
        let layer = |layer: u8, name: &str, clips: Vec<String>| LayerDocument {
            layer,
            name: name.into(),
            clips,
        };
        EcmDocument {
            version: self.version,
            skill: self.skill.clone(),
            h_min: self.h_min,
            layers: vec![
                layer(1, "skill", vec![root.clone()]),
                layer(2, "sensing", self.sensing.iter().map(|s| sensing_clip(s)).collect()),
                layer(3, "perceptual_state", percepts),
                layer(4, "preparation", prep_labels.iter().map(|p| prep_clip(p)).collect()),
                layer(5, "basic", vec![basic.clone()]),
            ],
            edges,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    pub layer: u8,
    pub name: String,
    pub clips: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDocument {
    pub from: String,
    pub to: String,
    pub h: f64,
    pub probability: f64,
    /// Deterministic edges are chosen by classification, not sampled.
    pub stochastic: bool,
}

impl EdgeDocument {
    fn new(from: &str, to: &str, h: f64, probability: f64, stochastic: bool) -> Self {
        EdgeDocument {
            from: from.into(),
            to: to.into(),
            h,
            probability,
            stochastic,
        }
    }
}

/// Serialized form of a trained ECM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcmDocument {
    pub version: u32,
    pub skill: String,
    pub h_min: f64,
    pub layers: Vec<LayerDocument>,
    pub edges: Vec<EdgeDocument>,
}
