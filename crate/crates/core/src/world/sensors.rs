//! Sensor model: per-channel base values derived from the world plus Gaussian noise.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::hardware::{HardwareHandle, HardwareKind};
use super::state::{ObjectKind, SimObject, WorldState};
use super::SimRng;

/// Default standard deviation of per-tick channel noise.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.5;

/// Base value of the sliding tactile channel for each quarter turn of a book.
pub const SLIDING_ORIENTATION_STEP: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub noise_sigma: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            noise_sigma: DEFAULT_NOISE_SIGMA,
        }
    }
}

/// Contact signal produced by the behaviour running at the current tick.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stimulus {
    pub tactile: Option<f64>,
    pub force: Option<f64>,
}

impl Stimulus {
    pub fn sliding(obj: &SimObject) -> Stimulus {
        let tactile = match obj.kind {
            ObjectKind::Book => SLIDING_ORIENTATION_STEP * obj.orientation.index() as f64,
            ObjectKind::BoxStack => 2.0,
            ObjectKind::LidBox => 1.0,
            ObjectKind::Cube => 3.0,
        };
        Stimulus {
            tactile: Some(tactile),
            force: Some(1.0),
        }
    }

    pub fn poking(obj: &SimObject) -> Stimulus {
        let force = match obj.kind {
            ObjectKind::BoxStack => 3.0 * obj.height as f64,
            ObjectKind::LidBox if obj.open => 1.0,
            ObjectKind::LidBox => 6.0,
            ObjectKind::Book => 2.0,
            ObjectKind::Cube => 1.5,
        };
        Stimulus {
            tactile: None,
            force: Some(force),
        }
    }

    pub fn pressing(obj: &SimObject) -> Stimulus {
        Stimulus {
            tactile: Some(obj.width()),
            force: Some(0.5),
        }
    }
}

impl SensorModel {
    /// Noise-free channel values of `handle` for the given world and stimulus.
    pub fn base_values(&self, handle: &HardwareHandle, world: &WorldState, stimulus: &Stimulus) -> Vec<f64> {
        let mut out = Vec::with_capacity(handle.row_count());
        match handle.kind {
            HardwareKind::Arm => {
                let pose = if handle.name.starts_with("left") {
                    world.arm_pose
                } else {
                    [10.0 - world.arm_pose[0].min(10.0), 0.0, 5.0]
                };
                out.extend_from_slice(&pose);
                out.push(stimulus.force.unwrap_or(0.0));
            }
            HardwareKind::Hand => {
                out.push(if world.hand_open { 1.0 } else { 0.0 });
                let holding = if world.held_object.is_some() { 2.0 } else { 0.0 };
                out.push(stimulus.tactile.unwrap_or(holding));
            }
            HardwareKind::Camera => {
                let pose = world.primary().map(|o| o.position).unwrap_or([0.0, 0.0]);
                out.extend_from_slice(&pose);
            }
        }
        debug_assert_eq!(out.len(), handle.row_count());
        out
    }

    /// One snapshot: base values plus noise plus an additive fault bias.
    pub fn sample(
        &self,
        handle: &HardwareHandle,
        world: &WorldState,
        stimulus: &Stimulus,
        bias: f64,
        rng: &mut SimRng,
    ) -> Vec<f64> {
        let mut values = self.base_values(handle, world, stimulus);
        if self.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.noise_sigma).expect("finite sigma");
            for v in &mut values {
                *v += normal.sample(rng);
            }
        }
        if bias != 0.0 {
            for v in &mut values {
                *v += bias;
            }
        }
        values
    }
}
