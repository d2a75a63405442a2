//! Learns tower disassembly. The skill's basic behaviour is empty, so all of
//! the work is done by the preparatory programs `repeat(pick_and_place, n)`
//! that playing learns to select from the poked tower height.

use skillforge::playing::{play, PlayConfig};
use skillforge::world::Simulator;
use skillforge::Engine;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::new(Simulator::default(), None)?;
    let config = PlayConfig {
        episodes: 300,
        seed: 42,
        ..PlayConfig::default()
    };
    let report = play(&engine, "tower_disassembly", &config, |_| {})?;
    let ecm = &report.ecm;
    println!("preparations: {:?}", ecm.preparations.iter().map(|p| p.label()).collect::<Vec<_>>());
    for (height, prep) in ecm.greedy_policy("poking") {
        println!("  {height} -> {prep}");
    }
    let heights = engine.attribute_situations("tower_disassembly", 0)?;
    let doa = engine.probe_doa("tower_disassembly", &heights)?;
    for probe in &doa.probed {
        println!("  {:<10} {}", probe.situation.label(), if probe.success { "cleared" } else { "failed" });
    }
    println!("success curve (every 50th episode):");
    for line in report.curve.to_csv().lines().skip(1).step_by(50) {
        println!("  {line}");
    }
    Ok(())
}
