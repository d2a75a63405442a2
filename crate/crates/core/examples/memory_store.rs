//! Persists executions to a SQLite file, reopens it, reconstructs a call
//! profile from its event log and extends the schema with a custom table.

use skillforge::memory::{
    ColumnDefinition, ColumnType, ExecutionFilter, SchemaExtension, Store, TableDefinition,
};
use skillforge::world::{seeded_rng, ScenarioId, Simulator, Situation};
use skillforge::Engine;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("skillforge-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("memory.db");

    let engine = Engine::new(Simulator::default(), Some(Store::open(&path)?))?;
    let mut last = None;
    for seed in 0..5 {
        let situation = Situation::new(ScenarioId::Flat, seed);
        let world = situation.instantiate(&engine.sim.catalog)?;
        last = Some(engine.execute_skill("simple_grasp", world, Some(situation), &mut seeded_rng(seed))?);
    }
    let exec = last.expect("five executions ran");
    drop(engine);

    let store = Store::open(&path)?;
    let stored = store.fetch_executions(&ExecutionFilter::subject("simple_grasp"))?;
    println!("{} simple_grasp executions after reopening {}", stored.len(), path.display());
    let record = store.fetch_execution(exec.record.id.expect("persisted"))?.expect("record exists");
    let rebuilt = exec.trace.to_profile(record.profile.functions(), record.ticks())?;
    println!(
        "record {:?}: {} sensor rows x {} ticks, profile rebuilt from {} events matches: {}",
        record.id,
        record.sensor.rows(),
        record.ticks(),
        exec.trace.events.len(),
        rebuilt == record.profile
    );

    let ext = SchemaExtension {
        owner: "gripper_calibration".into(),
        version: 1,
        tables: vec![TableDefinition {
            name: "gripper_offsets".into(),
            columns: vec![
                ColumnDefinition { name: "finger".into(), column_type: ColumnType::Text },
                ColumnDefinition { name: "offset".into(), column_type: ColumnType::Text },
            ],
        }],
    };
    store.install_schema(&ext)?;
    store.insert_row("gripper_offsets", &[("finger", "left"), ("offset", "0.02")])?;
    println!("extension columns: {:?}", store.columns_of("gripper_offsets")?);
    println!("installed extensions: {:?}", store.installed_extensions()?);

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
