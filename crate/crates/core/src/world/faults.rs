//! Instrumented function registry and software-fault injection.

use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::WorldError;

/// Every function the simulator profiles, in profile-matrix row order.
pub const INSTRUMENTED_FUNCTIONS: [&str; 24] = [
    "idle",
    "plan_joint",
    "plan_cartesian",
    "inverse_kinematics",
    "forward_kinematics",
    "check_collision",
    "execute_trajectory",
    "set_stiffness",
    "read_joint_state",
    "open_hand",
    "close_hand",
    "read_tactile",
    "camera_capture",
    "segment_point_cloud",
    "fit_box",
    "estimate_pose",
    "push_controller",
    "contact_detect",
    "slide_controller",
    "poke_controller",
    "press_controller",
    "read_force",
    "interpolate_waypoints",
    "grasp_planner",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRegistry {
    functions: Vec<String>,
}

impl Default for FunctionRegistry {
    fn default() -> Self {
        FunctionRegistry {
            functions: INSTRUMENTED_FUNCTIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl FunctionRegistry {
    pub fn new(functions: Vec<String>) -> Self {
        FunctionRegistry { functions }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.functions.iter().any(|f| f == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.functions.iter().position(|f| f == id)
    }

    pub fn ids(&self) -> &[String] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    /// Abort the running behaviour when the function is entered.
    FailHard,
    /// Add `sensor_bias` to every sensor channel from activation onward.
    DegradeSensors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub function_id: String,
    pub mode: FaultMode,
    pub trigger_probability: f64,
    #[serde(default)]
    pub sensor_bias: f64,
}

impl FaultSpec {
    pub fn fail_hard(function_id: impl Into<String>) -> Self {
        FaultSpec {
            function_id: function_id.into(),
            mode: FaultMode::FailHard,
            trigger_probability: 1.0,
            sensor_bias: 0.0,
        }
    }

    pub fn degrade_sensors(function_id: impl Into<String>, bias: f64) -> Self {
        FaultSpec {
            function_id: function_id.into(),
            mode: FaultMode::DegradeSensors,
            trigger_probability: 1.0,
            sensor_bias: bias,
        }
    }
}

/// Shared set of active faults; mutation is synchronized.
#[derive(Debug, Default)]
pub struct FaultRegistry {
    active: RwLock<Vec<FaultSpec>>,
}

impl FaultRegistry {
    pub fn inject(&self, spec: FaultSpec, functions: &FunctionRegistry) -> Result<(), WorldError> {
        if !functions.contains(&spec.function_id) {
            return Err(WorldError::UnknownFunction(spec.function_id));
        }
        if !(0.0..=1.0).contains(&spec.trigger_probability) {
            return Err(WorldError::InvalidFault(format!(
                "trigger probability {} outside [0, 1]",
                spec.trigger_probability
            )));
        }
        if !spec.sensor_bias.is_finite() {
            return Err(WorldError::InvalidFault("non-finite sensor bias".into()));
        }
        self.active.write().expect("fault registry poisoned").push(spec);
        Ok(())
    }

    pub fn clear(&self) {
        self.active.write().expect("fault registry poisoned").clear();
    }

    pub fn snapshot(&self) -> Vec<FaultSpec> {
        self.active.read().expect("fault registry poisoned").clone()
    }

    pub fn is_empty(&self) -> bool {
        self.active.read().expect("fault registry poisoned").is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_24_unique_functions() {
        let reg = FunctionRegistry::default();
        assert_eq!(reg.len(), 24);
        let mut ids = reg.ids().to_vec();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 24);
    }

    #[test]
    fn inject_validates_function_id() {
        let faults = FaultRegistry::default();
        let functions = FunctionRegistry::default();
        assert!(matches!(
            faults.inject(FaultSpec::fail_hard("no_such_fn"), &functions),
            Err(WorldError::UnknownFunction(_))
        ));
        faults.inject(FaultSpec::fail_hard("plan_cartesian"), &functions).unwrap();
        assert_eq!(faults.snapshot().len(), 1);
        faults.clear();
        assert!(faults.is_empty());
    }
}
