use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use skillforge::memory::EventKind;
use skillforge::skill::{AbortReason, ParamValue, Params, SkillError};
use skillforge::world::{
    seeded_rng, FaultSpec, Orientation, ScenarioId, Simulator, Situation, WorldError, DEFAULT_NOISE_SIGMA,
    INSTRUMENTED_FUNCTIONS,
};
use skillforge::{Engine, Execution};

const SCENARIOS: [ScenarioId; 4] = [ScenarioId::Book, ScenarioId::Tower, ScenarioId::Box, ScenarioId::Flat];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn engine() -> Engine {
    Engine::new(Simulator::default(), None).unwrap()
}

/// Behaviours that run with their default parameters.
fn parameterless(engine: &Engine) -> Vec<String> {
    engine
        .registry
        .behaviours()
        .into_iter()
        .filter(|b| b.descriptor().resolve_params(&Params::new()).is_ok())
        .map(|b| b.descriptor().id.clone())
        .collect()
}

fn run(engine: &Engine, behaviour: &str, scenario: ScenarioId, seed: u64) -> Execution {
    let world = engine.sim.create_world(scenario, seed).unwrap();
    engine
        .apply_behaviour(world, behaviour, &Params::new(), &mut seeded_rng(seed))
        .unwrap()
}

fn book_at(engine: &Engine, orientation: Orientation, seed: u64) -> skillforge::world::WorldState {
    Situation::with_attribute(ScenarioId::Book, seed, skillforge::world::Attribute::Orientation(orientation))
        .instantiate(&engine.sim.catalog)
        .unwrap()
}

#[test]
fn executions_are_deterministic() {
    let engine = engine();
    let behaviours = parameterless(&engine);
    let mut runner = runner(64);
    runner
        .run(&(0..behaviours.len(), 0..SCENARIOS.len(), any::<u64>()), |(b, s, seed)| {
            let first = run(&engine, &behaviours[b], SCENARIOS[s], seed);
            let second = run(&engine, &behaviours[b], SCENARIOS[s], seed);
            prop_assert_eq!(&first.world, &second.world);
            prop_assert_eq!(&first.record, &second.record);
            prop_assert_eq!(&first.trace, &second.trace);
            Ok(())
        })
        .unwrap();
}

#[test]
fn sensor_rows_follow_hardware_and_columns_follow_ticks() {
    let engine = engine();
    let behaviours = parameterless(&engine);
    let mut runner = runner(64);
    runner
        .run(&(0..behaviours.len(), 0..SCENARIOS.len(), any::<u64>()), |(b, s, seed)| {
            let exec = run(&engine, &behaviours[b], SCENARIOS[s], seed);
            let mut expected_rows: Vec<String> = exec
                .record
                .hardware_config
                .iter()
                .flat_map(|h| engine.sim.acquire_hardware(h).unwrap().row_names())
                .collect();
            let mut rows = exec.record.sensor.channels().to_vec();
            rows.sort();
            expected_rows.sort();
            prop_assert_eq!(rows, expected_rows);
            prop_assert!(exec.record.ticks() >= 1);
            prop_assert_eq!(exec.record.sensor.ticks(), exec.record.profile.ticks());
            prop_assert!(exec.record.end_tick >= exec.record.start_tick);
            Ok(())
        })
        .unwrap();
}

#[test]
fn traces_are_well_nested() {
    let engine = engine();
    let behaviours = parameterless(&engine);
    let mut runner = runner(64);
    runner
        .run(
            &(0..behaviours.len(), 0..SCENARIOS.len(), any::<u64>(), proptest::option::of(0..INSTRUMENTED_FUNCTIONS.len())),
            |(b, s, seed, fault)| {
                if let Some(f) = fault {
                    engine.sim.inject_fault(FaultSpec::fail_hard(INSTRUMENTED_FUNCTIONS[f])).unwrap();
                }
                let exec = run(&engine, &behaviours[b], SCENARIOS[s], seed);
                engine.sim.clear_faults();
                prop_assert!(exec.trace.is_well_nested());
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn void_behaviour_is_the_identity() {
    let engine = engine();
    let mut runner = runner(32);
    runner
        .run(&(0..SCENARIOS.len(), any::<u64>()), |(s, seed)| {
            let world = engine.sim.create_world(SCENARIOS[s], seed).unwrap();
            let exec = engine
                .apply_behaviour(world.clone(), "b_void", &Params::new(), &mut seeded_rng(seed))
                .unwrap();
            prop_assert_eq!(&exec.world, &world);
            prop_assert!(exec.success());
            prop_assert_eq!(exec.record.ticks(), 1);
            Ok(())
        })
        .unwrap();
}

#[test]
fn hard_faults_fail_exactly_the_executions_that_enter_them() {
    let engine = engine();
    let behaviours = parameterless(&engine);
    let mut runner = runner(128);
    runner
        .run(
            &(0..behaviours.len(), 0..SCENARIOS.len(), any::<u64>(), 0..INSTRUMENTED_FUNCTIONS.len()),
            |(b, s, seed, f)| {
                let function = INSTRUMENTED_FUNCTIONS[f];
                let clean = run(&engine, &behaviours[b], SCENARIOS[s], seed);
                engine.sim.inject_fault(FaultSpec::fail_hard(function)).unwrap();
                let faulty = run(&engine, &behaviours[b], SCENARIOS[s], seed);
                engine.sim.clear_faults();
                let fault_fired = matches!(
                    faulty.abort.as_ref().map(|a| &a.reason),
                    Some(AbortReason::Fault { function: hit }) if hit == function
                );
                prop_assert_eq!(fault_fired, clean.trace.contains(function));
                if !fault_fired {
                    prop_assert_eq!(&faulty.record, &clean.record);
                } else {
                    prop_assert!(!faulty.success());
                }
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn push_to_orientation_turns_the_book() {
    let engine = engine();
    let world = book_at(&engine, Orientation::Deg90, 1);
    let params = Params::from([("orientation".to_string(), ParamValue::Enum("Deg0".into()))]);
    let exec = engine
        .apply_behaviour(world, "push_to_orientation", &params, &mut seeded_rng(1))
        .unwrap();
    assert!(exec.success());
    assert_eq!(exec.world.primary().unwrap().orientation, Orientation::Deg0);
    assert!(exec.record.ticks() >= 1);
}

#[test]
fn sliding_separates_opposite_book_orientations() {
    let engine = engine();
    let channel_means = |o| {
        let exec = engine
            .apply_behaviour(book_at(&engine, o, 3), "sliding", &Params::new(), &mut seeded_rng(3))
            .unwrap();
        let m = exec.record.sensor;
        (0..m.rows())
            .map(|r| m.row(r).iter().sum::<f64>() / m.ticks() as f64)
            .collect::<Vec<_>>()
    };
    let upright = channel_means(Orientation::Deg0);
    let flipped = channel_means(Orientation::Deg180);
    let separation = upright
        .iter()
        .zip(&flipped)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(separation >= 3.0 * DEFAULT_NOISE_SIGMA, "separation {separation}");
}

#[test]
fn basic_book_grasp_fails_on_a_turned_book() {
    let engine = engine();
    let world = book_at(&engine, Orientation::Deg90, 2);
    let exec = engine
        .apply_behaviour(world, "book_grasping_basic", &Params::new(), &mut seeded_rng(2))
        .unwrap();
    assert!(!engine.sim.read_success_ground_truth(&exec.world, "book_grasped").unwrap());
}

#[test]
fn degradation_shifts_sensor_rows_by_the_bias() {
    let engine = engine();
    let world = engine.sim.create_world(ScenarioId::Box, 4).unwrap();
    let clean = engine
        .apply_behaviour(world.clone(), "pressing", &Params::new(), &mut seeded_rng(4))
        .unwrap();
    engine.sim.inject_fault(FaultSpec::degrade_sensors("close_hand", 5.0)).unwrap();
    let degraded = engine
        .apply_behaviour(world, "pressing", &Params::new(), &mut seeded_rng(4))
        .unwrap();
    engine.sim.clear_faults();
    let onset = clean
        .trace
        .events
        .iter()
        .find(|e| e.kind == EventKind::Enter && e.function == "close_hand")
        .unwrap()
        .tick as usize;
    let (a, b) = (&clean.record.sensor, &degraded.record.sensor);
    assert_eq!(a.ticks(), b.ticks());
    for r in 0..a.rows() {
        for t in 0..a.ticks() {
            let shift = b.get(r, t) - a.get(r, t);
            let expected = if t >= onset { 5.0 } else { 0.0 };
            assert!((shift - expected).abs() < 1e-9, "row {r} tick {t}: shift {shift}");
        }
    }
}

#[test]
fn zero_probability_faults_change_nothing() {
    let engine = engine();
    for function in INSTRUMENTED_FUNCTIONS {
        let clean = run(&engine, "simple_grasp_basic", ScenarioId::Flat, 5);
        let mut spec = FaultSpec::fail_hard(function);
        spec.trigger_probability = 0.0;
        engine.sim.inject_fault(spec).unwrap();
        let faulty = run(&engine, "simple_grasp_basic", ScenarioId::Flat, 5);
        engine.sim.clear_faults();
        assert_eq!(clean.record, faulty.record);
        assert_eq!(clean.world, faulty.world);
    }
}

#[test]
fn hard_fault_on_plan_cartesian_fails_every_covering_behaviour() {
    let engine = engine();
    engine.sim.inject_fault(FaultSpec::fail_hard("plan_cartesian")).unwrap();
    for b in parameterless(&engine) {
        let exec = run(&engine, &b, ScenarioId::Flat, 6);
        if exec.trace.contains("plan_cartesian") {
            assert!(!exec.success(), "{b} succeeded through a failing plan_cartesian");
        }
    }
}

#[test]
fn behaviour_errors() {
    let engine = engine();
    let world = engine.sim.create_world(ScenarioId::Flat, 0).unwrap();
    let mut rng = seeded_rng(0);
    assert!(matches!(
        engine.apply_behaviour(world.clone(), "moonwalk", &Params::new(), &mut rng),
        Err(SkillError::UnknownBehaviour(_))
    ));
    assert!(matches!(
        engine.apply_behaviour(world.clone(), "rotate_by", &Params::new(), &mut rng),
        Err(SkillError::ParamSchema { .. })
    ));
    let bad = Params::from([("angle".to_string(), ParamValue::Vec2([1.0, 2.0]))]);
    assert!(matches!(
        engine.apply_behaviour(world.clone(), "rotate_by", &bad, &mut rng),
        Err(SkillError::ParamSchema { .. })
    ));
    let lease = engine.sim.hardware.lease(&BTreeSet::from(["left_arm".to_string()])).unwrap();
    assert!(matches!(
        engine.apply_behaviour(world.clone(), "move_home", &Params::new(), &mut rng),
        Err(SkillError::World(WorldError::HardwareBusy(_)))
    ));
    drop(lease);
    assert!(engine.apply_behaviour(world, "move_home", &Params::new(), &mut rng).is_ok());
    assert!(matches!(
        engine.sim.inject_fault(FaultSpec::fail_hard("warp_drive")),
        Err(WorldError::UnknownFunction(_))
    ));
    assert!(engine.sim.create_world(ScenarioId::Book, 1).is_ok());
}

#[test]
fn scenario_ids_parse_and_reject_unknowns() {
    for s in SCENARIOS {
        assert_eq!(s.as_str().parse::<ScenarioId>().unwrap(), s);
    }
    assert!("kitchen".parse::<ScenarioId>().is_err());
}

#[test]
fn clock_never_runs_backwards() {
    let engine = engine();
    let mut world = engine.sim.create_world(ScenarioId::Flat, 8).unwrap();
    let mut rng = seeded_rng(8);
    for b in parameterless(&engine) {
        let before = world.clock;
        let exec = engine.apply_behaviour(world, &b, &Params::new(), &mut rng).unwrap();
        assert!(exec.world.clock >= before);
        world = exec.world;
        world.validate().unwrap();
    }
}
