//! Builds a grasp program from blocks, validates it, runs it in the flat
//! scenario and prints the execution record and call trace.

use std::collections::BTreeMap;

use skillforge::skill::{Node, ParamValue, ProgramAst};
use skillforge::world::{seeded_rng, ScenarioId, Simulator, Situation};
use skillforge::Engine;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::new(Simulator::default(), None)?;
    let target = BTreeMap::from([("target".to_string(), ParamValue::Var { var: "object_pose".into() })]);
    let ast = ProgramAst::new(Node::sequence(vec![
        Node::hardware(&["left_arm", "left_hand", "camera"]),
        Node::call("move_home"),
        Node::call("localise_object"),
        Node::call_with("cartesian_ptp", target),
        Node::call("close_hand"),
    ]));
    println!("program:\n{}", ast.to_json());

    let mut broken = ast.clone();
    if let Node::Sequence { children } = &mut broken.root {
        children.remove(0);
    }
    for d in engine.validate_program(&broken, None) {
        println!("without a hardware block: {d}");
    }

    engine.register_program("my_grasp", "reach and close the hand", ast.clone())?;
    let situation = Situation::new(ScenarioId::Flat, 7);
    let world = situation.instantiate(&engine.sim.catalog)?;
    let exec = engine.interpret_program("my_grasp", &ast, world, Some(situation), &mut seeded_rng(7))?;
    println!(
        "\nexecution: success {} over {} ticks, object held: {}",
        exec.success(),
        exec.record.ticks(),
        engine.evaluate_success("object_held", &exec.world)?
    );
    println!("sensor channels: {:?}", exec.record.sensor.channels());
    println!("functions entered: {:?}", exec.trace.functions());
    for f in exec.record.profile.functions() {
        if let Some(row) = exec.record.profile.row_index(f) {
            let active: usize = exec.record.profile.row(row).iter().filter(|c| **c > 0).count();
            if active > 0 {
                println!("  {f:<22} active on {active} ticks");
            }
        }
    }
    Ok(())
}
