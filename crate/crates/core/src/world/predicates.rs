//! Ground-truth success predicates evaluated on a world state.

use std::collections::BTreeMap;

use super::state::{planar_distance, ObjectKind, Orientation, WorldState, HOME_POSE};
use super::WorldError;

/// Where `push_to_front` delivers objects, directly in front of the robot.
pub const FRONT_POSITION: [f64; 2] = [5.0, 2.0];
/// Shelf location used by the placement skills.
pub const SHELF_POSITION: [f64; 2] = [9.0, 5.0];
/// Distance within which an object counts as at a target location.
pub const PLACEMENT_TOLERANCE: f64 = 0.75;

pub type PredicateFn = fn(&WorldState) -> bool;

#[derive(Debug, Clone)]
pub struct PredicateRegistry {
    predicates: BTreeMap<String, PredicateFn>,
}

impl Default for PredicateRegistry {
    fn default() -> Self {
        let mut predicates: BTreeMap<String, PredicateFn> = BTreeMap::new();
        predicates.insert("book_grasped".into(), book_grasped);
        predicates.insert("tower_cleared".into(), tower_cleared);
        predicates.insert("object_held".into(), object_held);
        predicates.insert("object_in_bin".into(), object_in_bin);
        predicates.insert("object_at_front".into(), object_at_front);
        predicates.insert("object_on_shelf".into(), object_on_shelf);
        predicates.insert("hand_empty".into(), hand_empty);
        predicates.insert("arm_home".into(), arm_home);
        predicates.insert("lid_open".into(), lid_open);
        predicates.insert("book_upright".into(), book_upright);
        predicates.insert("arm_at_object".into(), arm_at_object);
        PredicateRegistry { predicates }
    }
}

impl PredicateRegistry {
    pub fn contains(&self, id: &str) -> bool {
        self.predicates.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.predicates.keys().map(String::as_str)
    }

    pub fn register(&mut self, id: impl Into<String>, f: PredicateFn) {
        self.predicates.insert(id.into(), f);
    }

    /// Pure evaluation of a registered predicate.
    pub fn evaluate(&self, id: &str, world: &WorldState) -> Result<bool, WorldError> {
        let f = self
            .predicates
            .get(id)
            .ok_or_else(|| WorldError::UnknownPredicate(id.to_string()))?;
        Ok(f(world))
    }
}

fn book_grasped(w: &WorldState) -> bool {
    match &w.held_object {
        Some(id) => w.object(id).is_some_and(|o| o.kind == ObjectKind::Book),
        None => false,
    }
}

fn tower_cleared(w: &WorldState) -> bool {
    w.objects
        .iter()
        .filter(|o| o.kind == ObjectKind::BoxStack)
        .all(|o| o.height == 0)
}

fn object_held(w: &WorldState) -> bool {
    w.held_object.is_some()
}

fn object_in_bin(w: &WorldState) -> bool {
    let Some(bin) = w.objects.iter().find(|o| o.kind == ObjectKind::LidBox) else {
        return false;
    };
    w.held_object.is_none()
        && w.objects.iter().any(|o| {
            o.id != bin.id
                && matches!(o.kind, ObjectKind::Cube | ObjectKind::Book)
                && planar_distance(o.position, bin.position) <= PLACEMENT_TOLERANCE
        })
}

fn object_at_front(w: &WorldState) -> bool {
    w.primary()
        .is_some_and(|o| planar_distance(o.position, FRONT_POSITION) <= PLACEMENT_TOLERANCE)
}

fn object_on_shelf(w: &WorldState) -> bool {
    w.held_object.is_none()
        && w.primary()
            .is_some_and(|o| planar_distance(o.position, SHELF_POSITION) <= PLACEMENT_TOLERANCE)
}

fn hand_empty(w: &WorldState) -> bool {
    w.held_object.is_none()
}

fn arm_home(w: &WorldState) -> bool {
    w.arm_pose
        .iter()
        .zip(HOME_POSE.iter())
        .all(|(a, b)| (a - b).abs() < 1e-9)
}

fn arm_at_object(w: &WorldState) -> bool {
    w.primary()
        .is_some_and(|o| planar_distance(o.position, [w.arm_pose[0], w.arm_pose[1]]) <= PLACEMENT_TOLERANCE)
}

fn lid_open(w: &WorldState) -> bool {
    w.first_of_kind(ObjectKind::LidBox).is_some_and(|o| o.open)
}

fn book_upright(w: &WorldState) -> bool {
    w.first_of_kind(ObjectKind::Book)
        .is_some_and(|o| o.orientation == Orientation::Deg0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{ScenarioCatalog, ScenarioId};

    #[test]
    fn book_grasped_follows_held_object() {
        let reg = PredicateRegistry::default();
        let mut w = ScenarioCatalog::default().create_world(ScenarioId::Book, 1).unwrap();
        assert!(!reg.evaluate("book_grasped", &w).unwrap());
        w.hand_open = false;
        w.held_object = Some("book".into());
        assert!(reg.evaluate("book_grasped", &w).unwrap());
    }

    #[test]
    fn tower_cleared_only_at_height_zero() {
        let reg = PredicateRegistry::default();
        let mut w = ScenarioCatalog::default().create_world(ScenarioId::Tower, 7).unwrap();
        w.objects[0].height = 0;
        assert!(reg.evaluate("tower_cleared", &w).unwrap());
        w.objects[0].height = 2;
        assert!(!reg.evaluate("tower_cleared", &w).unwrap());
    }

    #[test]
    fn unknown_predicate_errors() {
        let reg = PredicateRegistry::default();
        let w = ScenarioCatalog::default().create_world(ScenarioId::Flat, 0).unwrap();
        assert!(matches!(reg.evaluate("nope", &w), Err(WorldError::UnknownPredicate(_))));
    }
}
