//! The default skill catalog: the programs and skills a fresh engine knows.

use super::behaviour::{ParamValue, Params};
use super::program::{Node, ProgramAst};
use super::registry::{PlayingSpec, Skill};
use super::SkillError;
use crate::engine::Engine;
use crate::playing::PrepAction;
use crate::world::{ScenarioId, FRONT_POSITION};

/// Untrained skills used as test cases for fault localization, with the
/// scenario each is exercised in.
pub const DIAGNOSTIC_SKILLS: [(&str, ScenarioId); 10] = [
    ("haptic_survey", ScenarioId::Box),
    ("look", ScenarioId::Flat),
    ("pick_and_place", ScenarioId::Flat),
    ("press_lid", ScenarioId::Box),
    ("push_to_front", ScenarioId::Flat),
    ("reach_object", ScenarioId::Flat),
    ("shelf_placement", ScenarioId::Flat),
    ("simple_grasp", ScenarioId::Flat),
    ("stiff_home", ScenarioId::Flat),
    ("tactile_check", ScenarioId::Box),
];

/// Shelf approach used by `shelf_placement`.
pub const SHELF_WAYPOINTS: [[f64; 3]; 2] = [[7.0, 3.0, 4.0], [9.0, 5.0, 2.0]];

const ARM_HAND_CAMERA: &[&str] = &["left_arm", "left_hand", "camera"];
const ARM_HAND: &[&str] = &["left_arm", "left_hand"];

fn param(name: &str, value: ParamValue) -> Params {
    Params::from([(name.to_string(), value)])
}

fn var(name: &str) -> ParamValue {
    ParamValue::Var { var: name.into() }
}

fn program(hardware: &[&str], body: Vec<Node>) -> ProgramAst {
    let mut children = vec![Node::hardware(hardware)];
    children.extend(body);
    ProgramAst::new(Node::sequence(children))
}

/// Move home, localise the object, reach it and close the hand.
pub fn simple_grasp_program() -> ProgramAst {
    program(
        ARM_HAND_CAMERA,
        vec![
            Node::call("move_home"),
            Node::call("localise_object"),
            Node::call_with("cartesian_ptp", param("target", var("object_pose"))),
            Node::call("close_hand"),
        ],
    )
}

/// Grasp with the `simple_grasp` skill, then drop the object into the bin.
pub fn pick_and_place_program() -> ProgramAst {
    program(
        ARM_HAND_CAMERA,
        vec![
            Node::skill("simple_grasp"),
            Node::call("localise_bin"),
            Node::call_with("cartesian_ptp", param("target", var("bin_pose"))),
            Node::call("open_hand"),
        ],
    )
}

/// Basic behaviour of `book_grasping`: reach straight for the book and grasp.
pub fn book_grasp_program() -> ProgramAst {
    program(
        ARM_HAND_CAMERA,
        vec![
            Node::call("localise_object"),
            Node::call_with("cartesian_ptp", param("target", var("object_pose"))),
            Node::call("close_hand"),
        ],
    )
}

fn catalog_programs() -> Vec<(&'static str, &'static str, ProgramAst)> {
    vec![
        ("simple_grasp_basic", "Grasp the object on the table", simple_grasp_program()),
        (
            "push_to_front_basic",
            "Push the object in front of the robot",
            program(
                ARM_HAND,
                vec![Node::call_with(
                    "push_to_position",
                    param("target", ParamValue::Vec2(FRONT_POSITION)),
                )],
            ),
        ),
        (
            "stiff_home_basic",
            "Stiffen the arm, settle and return home",
            program(
                &["left_arm"],
                vec![
                    Node::call("change_stiffness"),
                    Node::call_with("wait", param("ticks", ParamValue::Int(2))),
                    Node::call("move_home"),
                ],
            ),
        ),
        (
            "haptic_survey_basic",
            "Slide over and poke the object",
            program(ARM_HAND, vec![Node::call("sliding"), Node::call("poking")]),
        ),
        (
            "press_lid_basic",
            "Stiffen the arm, move over the box and press its button",
            program(
                &["left_arm"],
                vec![
                    Node::call_with("change_stiffness", param("stiffness", ParamValue::Real(0.9))),
                    Node::call_with("joint_ptp", param("goal", ParamValue::Vec2([5.0, 6.0]))),
                    Node::call("press_button"),
                ],
            ),
        ),
        (
            "tactile_check_basic",
            "Press and poke the object, then open the hand",
            program(
                ARM_HAND,
                vec![Node::call("pressing"), Node::call("poking"), Node::call("open_hand")],
            ),
        ),
        (
            "reach_object_basic",
            "Localise the object and move the hand above it",
            program(
                &["left_arm", "camera"],
                vec![
                    Node::call("localise_object"),
                    Node::call_with("cartesian_ptp", param("target", var("object_pose"))),
                ],
            ),
        ),
        (
            "look_basic",
            "Localise the bin",
            program(&["camera"], vec![Node::call("localise_bin")]),
        ),
        ("book_grasping_basic", "Grasp a book lying spine forward", book_grasp_program()),
    ]
}

fn rotate(angle: i64) -> PrepAction {
    PrepAction::behaviour("rotate_by", param("angle", ParamValue::Int(angle)))
}

/// `repeat(pick_and_place, n)` as a preparatory program.
pub fn repeat_pick_and_place(n: u32) -> PrepAction {
    PrepAction::Program {
        label: format!("repeat(pick_and_place, {n})"),
        program: Node::repeat(n, Node::skill("pick_and_place")),
    }
}

/// Registers the default programs and skills.
pub fn install(engine: &Engine) -> Result<(), SkillError> {
    let mut programs = catalog_programs().into_iter();
    let (id, description, ast) = programs.next().expect("simple grasp comes first");
    engine.register_program(id, description, ast)?;
    engine.create_skill(
        Skill::new("simple_grasp", Some("simple_grasp_basic"), "object_held", ARM_HAND_CAMERA)
            .describe("Grasp the object on the table"),
    )?;
    engine.register_program(
        "pick_and_place_basic",
        "Grasp the object and drop it into the bin",
        pick_and_place_program(),
    )?;
    engine.register_program(
        "shelf_placement_basic",
        "Grasp the object and place it on the shelf",
        program(
            ARM_HAND_CAMERA,
            vec![
                Node::skill("simple_grasp"),
                Node::WaypointMotion {
                    waypoints: SHELF_WAYPOINTS.to_vec(),
                },
                Node::call("open_hand"),
            ],
        ),
    )?;
    for (id, description, ast) in programs {
        engine.register_program(id, description, ast)?;
    }

    let skills = [
        ("pick_and_place", "object_in_bin", ARM_HAND_CAMERA, "Put the object into the bin"),
        ("push_to_front", "object_at_front", ARM_HAND, "Push the object in front of the robot"),
        ("stiff_home", "arm_home", &["left_arm"][..], "Return home with a stiff arm"),
        ("haptic_survey", "hand_empty", ARM_HAND, "Touch the object without grasping it"),
        ("shelf_placement", "object_on_shelf", ARM_HAND_CAMERA, "Place the object on the shelf"),
        ("press_lid", "lid_open", &["left_arm"][..], "Open the box by pressing its button"),
        ("tactile_check", "hand_empty", ARM_HAND, "Squeeze and poke the object"),
        ("reach_object", "arm_at_object", &["left_arm", "camera"][..], "Move the hand above the object"),
        ("look", "hand_empty", &["camera"][..], "Localise the bin"),
    ];
    for (id, predicate, hardware, description) in skills {
        let basic = format!("{id}_basic");
        engine.create_skill(Skill::new(id, Some(&basic), predicate, hardware).describe(description))?;
    }
    for (id, scenario) in DIAGNOSTIC_SKILLS {
        let mut skill = (*engine.registry.skill(id)?).clone();
        skill.scenario = Some(scenario);
        engine.update_skill(skill)?;
    }

    engine.create_skill(
        Skill::new("book_grasping", Some("book_grasping_basic"), "book_grasped", ARM_HAND_CAMERA)
            .describe("Grasp a book whatever its orientation")
            .played_in(
                ScenarioId::Book,
                PlayingSpec {
                    sensing_actions: vec!["sliding".into(), "poking".into()],
                    preparations: vec![rotate(90), rotate(180), rotate(-90), PrepAction::Void],
                },
            ),
    )?;
    engine.create_skill(
        Skill::new("tower_disassembly", None, "tower_cleared", ARM_HAND_CAMERA)
            .describe("Clear a tower of boxes into the bin")
            .played_in(
                ScenarioId::Tower,
                PlayingSpec {
                    sensing_actions: vec!["poking".into()],
                    preparations: (1..=3).map(repeat_pick_and_place).chain([PrepAction::Void]).collect(),
                },
            ),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use super::*;
    use crate::world::Simulator;

    fn engine() -> Engine {
        Engine::new(Simulator::default(), None).unwrap()
    }

    #[test]
    fn every_function_has_a_distinct_coverage_signature() {
        let e = engine();
        let mut signatures: BTreeMap<Vec<&str>, Vec<String>> = BTreeMap::new();
        let coverage: Vec<(&str, BTreeSet<String>)> = DIAGNOSTIC_SKILLS
            .iter()
            .map(|(s, _)| (*s, e.skill_coverage(s).unwrap()))
            .collect();
        for f in e.sim.functions.ids() {
            let sig: Vec<&str> = coverage.iter().filter(|(_, c)| c.contains(f)).map(|(s, _)| *s).collect();
            signatures.entry(sig).or_default().push(f.clone());
        }
        for (sig, functions) in &signatures {
            assert!(!sig.is_empty(), "{functions:?} covered by no skill");
            assert_eq!(functions.len(), 1, "{functions:?} share coverage {sig:?}");
        }
        assert!(e.sim.functions.len() >= 20);
    }

    #[test]
    fn learning_skills_are_registered() {
        let e = engine();
        assert_eq!(e.registry.skill("tower_disassembly").unwrap().basic_behaviour, None);
        assert!(e.registry.skill("book_grasping").unwrap().playing.is_some());
    }
}
