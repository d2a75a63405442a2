//! Localizes an injected software fault by running diagnostic skills and
//! updating a blame distribution over the instrumented functions. Compares
//! information-gain test selection with random selection.

use skillforge::diagnosis::{diagnose, Diagnoser, DiagnosisConfig, Strategy};
use skillforge::skill::catalog::DIAGNOSTIC_SKILLS;
use skillforge::world::{seeded_rng, FaultSpec, Simulator};
use skillforge::Engine;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::new(Simulator::default(), None)?;
    let skills: Vec<_> = DIAGNOSTIC_SKILLS.iter().map(|(s, sc)| (s.to_string(), *sc)).collect();
    let diagnoser = Diagnoser::train(&engine, DiagnosisConfig::default(), &skills, 30, &mut seeded_rng(0))?;

    for fault in ["plan_cartesian", "read_tactile", "fit_box"] {
        engine.sim.inject_fault(FaultSpec::fail_hard(fault))?;
        for strategy in [Strategy::InformationGain, Strategy::UniformRandom] {
            let (blame, session) = diagnose(&engine, &diagnoser, 15, strategy, &mut seeded_rng(7), |_| {})?;
            let (argmax, p) = blame.argmax();
            let tests: Vec<&str> = session.steps.iter().map(|s| s.skill.as_str()).collect();
            println!("{fault:<15} {strategy:?}: blamed {argmax} (p = {p:.3}) after {} tests {tests:?}", tests.len());
        }
        engine.sim.clear_faults();
    }

    let (blame, _) = diagnose(&engine, &diagnoser, 15, Strategy::InformationGain, &mut seeded_rng(7), |_| {})?;
    let (argmax, p) = blame.argmax();
    println!("without a fault: {argmax} (p = {p:.3})");
    Ok(())
}
