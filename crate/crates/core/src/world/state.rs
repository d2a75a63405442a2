//! Simulated tabletop state: objects, the arm, the hand and the tick clock.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::WorldError;

/// Side length of the square workspace grid.
pub const WORKSPACE_SIZE: f64 = 10.0;

/// Arm pose the `move_home` behaviour returns to.
pub const HOME_POSE: [f64; 3] = [5.0, 0.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    Book,
    Tower,
    Box,
    Flat,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [
        ScenarioId::Book,
        ScenarioId::Tower,
        ScenarioId::Box,
        ScenarioId::Flat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::Book => "book",
            ScenarioId::Tower => "tower",
            ScenarioId::Box => "box",
            ScenarioId::Flat => "flat",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "book" => Ok(ScenarioId::Book),
            "tower" => Ok(ScenarioId::Tower),
            "box" => Ok(ScenarioId::Box),
            "flat" => Ok(ScenarioId::Flat),
            _ => Err(WorldError::UnknownScenario(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Book,
    BoxStack,
    LidBox,
    Cube,
}

/// Quarter-turn orientation of an object on the table.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum Orientation {
    #[default]
    Deg0,
    Deg90,
    Deg180,
    Deg270,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::Deg0,
        Orientation::Deg90,
        Orientation::Deg180,
        Orientation::Deg270,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Orientation {
        Self::ALL[i % 4]
    }

    pub fn degrees(self) -> i32 {
        90 * self.index() as i32
    }

    /// Rotates by a signed multiple of 90 degrees.
    pub fn rotated(self, degrees: i32) -> Result<Orientation, WorldError> {
        if degrees % 90 != 0 {
            return Err(WorldError::InvalidAngle(degrees));
        }
        let quarter = (degrees / 90).rem_euclid(4) as usize;
        Ok(Self::from_index(self.index() + quarter))
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Deg{}", self.degrees())
    }
}

impl FromStr for Orientation {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.trim_start_matches("Deg").trim_start_matches("deg");
        match digits {
            "0" => Ok(Orientation::Deg0),
            "90" => Ok(Orientation::Deg90),
            "180" => Ok(Orientation::Deg180),
            "270" => Ok(Orientation::Deg270),
            _ => Err(WorldError::InvalidAttribute(format!("orientation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub id: String,
    pub kind: ObjectKind,
    pub position: [f64; 2],
    #[serde(default)]
    pub orientation: Orientation,
    /// Stack height, meaningful for `BoxStack` only.
    #[serde(default)]
    pub height: u8,
    /// Lid state, meaningful for `LidBox` only.
    #[serde(default)]
    pub open: bool,
}

impl SimObject {
    pub fn new(id: impl Into<String>, kind: ObjectKind, position: [f64; 2]) -> Self {
        SimObject {
            id: id.into(),
            kind,
            position,
            orientation: Orientation::Deg0,
            height: 0,
            open: false,
        }
    }

    /// Footprint width sensed when the object is pressed between both hands.
    pub fn width(&self) -> f64 {
        match self.kind {
            ObjectKind::Book => 3.0,
            ObjectKind::BoxStack => 2.0,
            ObjectKind::LidBox => 5.0,
            ObjectKind::Cube => 1.0,
        }
    }
}

/// Task-relevant attribute of a scenario's primary object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Orientation(Orientation),
    Height(u8),
    Open(bool),
}

impl Attribute {
    /// Label used for perceptual states and haptic database entries.
    pub fn label(&self) -> String {
        match self {
            Attribute::Orientation(o) => o.to_string(),
            Attribute::Height(h) => format!("h{h}"),
            Attribute::Open(true) => "open".to_string(),
            Attribute::Open(false) => "closed".to_string(),
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Full simulated environment plus robot-internal state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub scenario: ScenarioId,
    pub objects: Vec<SimObject>,
    pub arm_pose: [f64; 3],
    pub hand_open: bool,
    pub held_object: Option<String>,
    pub clock: u64,
}

impl WorldState {
    pub fn object(&self, id: &str) -> Option<&SimObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: &str) -> Option<&mut SimObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    /// The first object of the inventory is the scenario's subject.
    pub fn primary(&self) -> Option<&SimObject> {
        self.objects.first()
    }

    pub fn primary_mut(&mut self) -> Option<&mut SimObject> {
        self.objects.first_mut()
    }

    pub fn first_of_kind(&self, kind: ObjectKind) -> Option<&SimObject> {
        self.objects.iter().find(|o| o.kind == kind)
    }

    /// Attribute of the primary object that distinguishes situations in this scenario.
    pub fn situation_attribute(&self) -> Option<Attribute> {
        let primary = self.primary()?;
        match self.scenario {
            ScenarioId::Book => Some(Attribute::Orientation(primary.orientation)),
            ScenarioId::Tower => Some(Attribute::Height(primary.height)),
            ScenarioId::Box => Some(Attribute::Open(primary.open)),
            ScenarioId::Flat => None,
        }
    }

    /// Overwrites the primary object's attribute; fails when the attribute does not
    /// belong to this scenario.
    pub fn set_situation_attribute(&mut self, attribute: Attribute) -> Result<(), WorldError> {
        let scenario = self.scenario;
        let primary = self
            .primary_mut()
            .ok_or_else(|| WorldError::InvalidAttribute("world has no objects".into()))?;
        match (scenario, attribute) {
            (ScenarioId::Book, Attribute::Orientation(o)) => primary.orientation = o,
            (ScenarioId::Tower, Attribute::Height(h)) if h <= 5 => primary.height = h,
            (ScenarioId::Box, Attribute::Open(open)) => primary.open = open,
            (s, a) => {
                return Err(WorldError::InvalidAttribute(format!(
                    "{a:?} does not apply to scenario {s}"
                )))
            }
        }
        Ok(())
    }

    /// Checks the structural invariants of the state.
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.held_object.is_some() && self.hand_open {
            return Err(WorldError::Invariant("held object with open hand".into()));
        }
        for (i, obj) in self.objects.iter().enumerate() {
            if self.objects[..i].iter().any(|o| o.id == obj.id) {
                return Err(WorldError::Invariant(format!("duplicate object id {}", obj.id)));
            }
            if !obj.position.iter().all(|c| (0.0..=WORKSPACE_SIZE).contains(c)) {
                return Err(WorldError::Invariant(format!("{} out of bounds", obj.id)));
            }
            if obj.height > 5 {
                return Err(WorldError::Invariant(format!("{} height {}", obj.id, obj.height)));
            }
        }
        if let Some(held) = &self.held_object {
            if self.object(held).is_none() {
                return Err(WorldError::Invariant(format!("held object {held} missing")));
            }
        }
        Ok(())
    }
}

pub(crate) fn clamp_to_workspace(p: [f64; 2]) -> [f64; 2] {
    [p[0].clamp(0.0, WORKSPACE_SIZE), p[1].clamp(0.0, WORKSPACE_SIZE)]
}

pub(crate) fn planar_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_wraps_both_directions() {
        assert_eq!(Orientation::Deg90.rotated(-90).unwrap(), Orientation::Deg0);
        assert_eq!(Orientation::Deg270.rotated(90).unwrap(), Orientation::Deg0);
        assert_eq!(Orientation::Deg180.rotated(180).unwrap(), Orientation::Deg0);
        assert!(Orientation::Deg0.rotated(45).is_err());
    }

    #[test]
    fn orientation_parses_display_form() {
        for o in Orientation::ALL {
            assert_eq!(o.to_string().parse::<Orientation>().unwrap(), o);
        }
    }

    #[test]
    fn scenario_parse_rejects_unknown() {
        assert_eq!("Tower".parse::<ScenarioId>().unwrap(), ScenarioId::Tower);
        assert!(matches!("kitchen".parse::<ScenarioId>(), Err(WorldError::UnknownScenario(_))));
    }
}
