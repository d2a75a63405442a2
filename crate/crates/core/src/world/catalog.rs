//! Declarative scenario catalog and seeded world construction.

use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::state::{
    Attribute, ObjectKind, Orientation, ScenarioId, SimObject, WorldState, HOME_POSE,
};
use super::{SimRng, WorldError};

const DEFAULT_CATALOG: &str = include_str!("../../config/scenarios.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PositionSpec {
    Fixed([f64; 2]),
    Region { min: [f64; 2], max: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HeightSpec {
    Fixed(u8),
    Range([u8; 2]),
}

/// A literal value or the string `"random"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sampled<T> {
    Fixed(T),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub kind: ObjectKind,
    pub position: PositionSpec,
    #[serde(default)]
    pub orientation: Option<String>,
    #[serde(default)]
    pub height: Option<HeightSpec>,
    #[serde(default)]
    pub open: Option<Sampled<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    #[serde(default)]
    pub predicates: Vec<String>,
    #[serde(rename = "object", default)]
    pub objects: Vec<ObjectSpec>,
}

impl ScenarioSpec {
    /// Every value the scenario's situation attribute can take when sampled.
    pub fn attribute_values(&self) -> Vec<Attribute> {
        let Some(primary) = self.objects.first() else {
            return Vec::new();
        };
        match self.id {
            ScenarioId::Book => match primary.orientation.as_deref() {
                Some("random") => Orientation::ALL.iter().map(|o| Attribute::Orientation(*o)).collect(),
                Some(o) => o.parse().map(|o| vec![Attribute::Orientation(o)]).unwrap_or_default(),
                None => vec![Attribute::Orientation(Orientation::Deg0)],
            },
            ScenarioId::Tower => match primary.height {
                Some(HeightSpec::Range([lo, hi])) => (lo..=hi).map(Attribute::Height).collect(),
                Some(HeightSpec::Fixed(h)) => vec![Attribute::Height(h)],
                None => vec![Attribute::Height(0)],
            },
            ScenarioId::Box => match &primary.open {
                Some(Sampled::Keyword(_)) => vec![Attribute::Open(true), Attribute::Open(false)],
                Some(Sampled::Fixed(b)) => vec![Attribute::Open(*b)],
                None => vec![Attribute::Open(false)],
            },
            ScenarioId::Flat => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCatalog {
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioSpec>,
}

impl Default for ScenarioCatalog {
    fn default() -> Self {
        Self::from_toml(DEFAULT_CATALOG).expect("bundled scenario catalog is valid")
    }
}

impl ScenarioCatalog {
    pub fn from_toml(text: &str) -> Result<Self, WorldError> {
        let catalog: ScenarioCatalog =
            toml::from_str(text).map_err(|e| WorldError::Catalog(e.to_string()))?;
        catalog.check()?;
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| WorldError::Catalog(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    fn check(&self) -> Result<(), WorldError> {
        for spec in &self.scenarios {
            if spec.objects.is_empty() {
                return Err(WorldError::Catalog(format!("scenario {} has no objects", spec.id)));
            }
            for (i, o) in spec.objects.iter().enumerate() {
                if spec.objects[..i].iter().any(|p| p.id == o.id) {
                    return Err(WorldError::Catalog(format!("duplicate object id {}", o.id)));
                }
                if let Some(orientation) = o.orientation.as_deref() {
                    if orientation != "random" {
                        orientation.parse::<Orientation>()?;
                    }
                }
                if let Some(Sampled::Keyword(k)) = &o.open {
                    if k != "random" {
                        return Err(WorldError::Catalog(format!("bad open value {k:?}")));
                    }
                }
                let bounds = match o.height {
                    Some(HeightSpec::Range([lo, hi])) => Some((lo, hi)),
                    Some(HeightSpec::Fixed(h)) => Some((h, h)),
                    None => None,
                };
                if let Some((lo, hi)) = bounds {
                    if lo > hi || hi > 5 {
                        return Err(WorldError::Catalog(format!("bad height range for {}", o.id)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn scenario(&self, id: ScenarioId) -> Result<&ScenarioSpec, WorldError> {
        self.scenarios
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| WorldError::UnknownScenario(id.to_string()))
    }

    /// Builds the reproducible initial state for `(scenario, seed)`.
    pub fn create_world(&self, scenario: ScenarioId, seed: u64) -> Result<WorldState, WorldError> {
        let spec = self.scenario(scenario)?;
        let mut rng = SimRng::seed_from_u64(seed);
        let objects = spec
            .objects
            .iter()
            .map(|o| sample_object(o, &mut rng))
            .collect::<Result<Vec<_>, _>>()?;
        let world = WorldState {
            scenario,
            objects,
            arm_pose: HOME_POSE,
            hand_open: true,
            held_object: None,
            clock: 0,
        };
        world.validate()?;
        Ok(world)
    }
}

fn sample_object(spec: &ObjectSpec, rng: &mut SimRng) -> Result<SimObject, WorldError> {
    let position = match &spec.position {
        PositionSpec::Fixed(p) => *p,
        PositionSpec::Region { min, max } => [
            rng.random_range(min[0]..=max[0]),
            rng.random_range(min[1]..=max[1]),
        ],
    };
    let mut obj = SimObject::new(spec.id.clone(), spec.kind, position);
    obj.orientation = match spec.orientation.as_deref() {
        Some("random") => Orientation::from_index(rng.random_range(0..4)),
        Some(o) => o.parse()?,
        None => Orientation::Deg0,
    };
    obj.height = match spec.height {
        Some(HeightSpec::Fixed(h)) => h,
        Some(HeightSpec::Range([lo, hi])) => rng.random_range(lo..=hi),
        None => 0,
    };
    obj.open = match &spec.open {
        Some(Sampled::Fixed(b)) => *b,
        Some(Sampled::Keyword(_)) => rng.random_bool(0.5),
        None => false,
    };
    Ok(obj)
}
