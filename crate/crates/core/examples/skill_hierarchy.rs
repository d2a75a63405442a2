//! Composes skills into a hierarchy: pick-and-place reuses the simple grasp
//! skill, and a looped program repeats pick-and-place to clear a tower.

use skillforge::skill::catalog::pick_and_place_program;
use skillforge::skill::{Node, ProgramAst};
use skillforge::world::{seeded_rng, Attribute, ScenarioId, Simulator, Situation};
use skillforge::Engine;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::new(Simulator::default(), None)?;
    println!("pick_and_place program:\n{}", pick_and_place_program().to_json());

    let situation = Situation::new(ScenarioId::Flat, 3);
    let world = situation.instantiate(&engine.sim.catalog)?;
    let exec = engine.execute_skill("pick_and_place", world, Some(situation), &mut seeded_rng(3))?;
    println!(
        "pick_and_place: success {} after {} ticks",
        exec.success(),
        exec.record.ticks()
    );
    println!("coverage: {:?}", engine.skill_coverage("pick_and_place")?);

    let clear_tower = ProgramAst::new(Node::sequence(vec![
        Node::hardware(&["left_arm", "left_hand", "camera"]),
        Node::repeat(3, Node::skill("pick_and_place")),
    ]));
    for height in 1..=3 {
        let situation = Situation::with_attribute(ScenarioId::Tower, 1, Attribute::Height(height));
        let world = situation.instantiate(&engine.sim.catalog)?;
        let exec = engine.interpret_program("clear_tower", &clear_tower, world, Some(situation), &mut seeded_rng(1))?;
        println!(
            "tower h{height}: cleared {} in {} ticks",
            engine.evaluate_success("tower_cleared", &exec.world)?,
            exec.record.ticks()
        );
    }

    let arm_only = ["left_arm".to_string()].into_iter().collect();
    println!("skills runnable on the arm alone: {:?}", engine.list_skills_for_hardware(&arm_only));
    Ok(())
}
