//! Learns book grasping by autonomous playing: haptic exploration, a
//! perceptual classifier and a five-layer ECM trained by rewarded walks.
//!
//! Run with an episode count to override the default of 500:
//! `cargo run --release --example book_playing -- 500`

use skillforge::playing::{play, PlayConfig};
use skillforge::world::Simulator;
use skillforge::Engine;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(500);
    let engine = Engine::new(Simulator::default(), None)?;

    let situations = engine.attribute_situations("book_grasping", 0)?;
    let before = engine.probe_doa("book_grasping", &situations)?;
    println!("before playing: {}/{} orientations grasped", before.successes(), before.probed.len());

    let config = PlayConfig {
        episodes,
        seed: 42,
        ..PlayConfig::default()
    };
    let report = play(&engine, "book_grasping", &config, |e| {
        if e.episode % 100 == 0 {
            println!("episode {:>4}: running success {:.3}", e.episode, e.running_mean);
        }
    })?;

    let ecm = &report.ecm;
    println!("sensing probabilities:");
    for (s, p) in ecm.sensing.iter().zip(ecm.sensing_probabilities()) {
        println!("  {s:<8} {p:.3}");
    }
    let sensing = &ecm.sensing[ecm.greedy_sensing()];
    println!("greedy policy after {sensing}:");
    for (percept, prep) in ecm.greedy_policy(sensing) {
        println!("  {percept:<7} -> {prep}");
    }
    println!(
        "success over the last 100 episodes: {:.2}, promoted: {}",
        report.curve.trailing_rate(100),
        report.promoted
    );

    let after = engine.probe_doa("book_grasping", &situations)?;
    println!("after playing: {}/{} orientations grasped", after.successes(), after.probed.len());
    Ok(())
}
