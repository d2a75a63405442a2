use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillforge::playing::{
    collect_haptic_database, play, preparations_for, Classifier, Ecm, PerceptualModel, PlayConfig, PlayingError,
    PrepAction, WalkMode, WalkPath,
};
use skillforge::skill::Params;
use skillforge::world::{seeded_rng, Attribute, Orientation, ScenarioId, Simulator, Situation};
use skillforge::Engine;

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

fn book_sensing() -> Vec<String> {
    vec!["sliding".to_string(), "poking".to_string()]
}

fn book_model(engine: &Engine, seed: u64) -> PerceptualModel {
    let situations = engine.attribute_situations("book_grasping", 0).unwrap();
    let mut rng = seeded_rng(seed);
    let db = collect_haptic_database(engine, "book_grasping", &book_sensing(), &situations, 10, &mut rng).unwrap();
    PerceptualModel::train(&db, 0.25, &mut rng).unwrap()
}

/// Fraction of fresh sensing executions classified as their true orientation.
fn fresh_accuracy(engine: &Engine, model: &PerceptualModel, sensing: &str, trials: u64) -> f64 {
    let labels = model.labels(sensing).unwrap();
    let mut correct = 0;
    for seed in 0..trials {
        let orientation = Orientation::from_index(seed as usize % 4);
        let situation = Situation::with_attribute(ScenarioId::Book, 1000 + seed, Attribute::Orientation(orientation));
        let world = situation.instantiate(&engine.sim.catalog).unwrap();
        let exec = engine.apply_behaviour(world, sensing, &Params::new(), &mut seeded_rng(seed)).unwrap();
        let predicted = model.classify(sensing, &exec.record.sensor).unwrap();
        if labels[predicted] == orientation.to_string() {
            correct += 1;
        }
    }
    correct as f64 / trials as f64
}

fn synthetic_ecm(states: &[usize], preparations: usize) -> Ecm {
    let mut model = PerceptualModel::default();
    let mut sensing = Vec::new();
    for (i, &n) in states.iter().enumerate() {
        let name = format!("sense{i}");
        model.insert(
            &name,
            Classifier {
                channels: vec!["c".into()],
                labels: (0..n).map(|k| format!("s{k}")).collect(),
                centroids: (0..n).map(|k| vec![k as f64, 0.0]).collect(),
                accuracy: 1.0,
            },
        );
        sensing.push(name);
    }
    let preps = (1..preparations)
        .map(|k| PrepAction::behaviour(&format!("prep{k}"), Params::new()))
        .chain(std::iter::once(PrepAction::Void))
        .collect();
    Ecm::build("skill", sensing, model, preps, "basic", 1.0).unwrap()
}

fn random_path(ecm: &Ecm, rng: &mut ChaCha8Rng) -> WalkPath {
    let sensing = ecm.choose_sensing(WalkMode::Explore, rng);
    let percept = rng.random_range(0..ecm.percept_labels(sensing).len());
    let prep = ecm.choose_prep(sensing, percept, WalkMode::Explore, rng);
    WalkPath { sensing, percept, prep }
}

#[test]
fn haptic_database_covers_every_situation_and_sensing_action() {
    let engine = engine();
    let situations = engine.attribute_situations("book_grasping", 0).unwrap();
    let db = collect_haptic_database(&engine, "book_grasping", &book_sensing(), &situations, 10, &mut seeded_rng(1))
        .unwrap();
    assert_eq!(db.entries.len(), 80);
    assert_eq!(db.sensing_actions(), book_sensing());
    assert_eq!(db.labels("sliding"), ["Deg0", "Deg90", "Deg180", "Deg270"]);
    assert!(matches!(
        collect_haptic_database(&engine, "book_grasping", &book_sensing(), &situations, 0, &mut seeded_rng(1)),
        Err(PlayingError::InvalidConfig(_))
    ));
    assert!(collect_haptic_database(&engine, "book_grasping", &["move_home".to_string()], &situations, 1, &mut seeded_rng(1))
        .is_err());
}

#[test]
fn sliding_reveals_orientation_and_poking_does_not() {
    let engine = engine();
    let model = book_model(&engine, 2);
    let sliding = fresh_accuracy(&engine, &model, "sliding", 400);
    let poking = fresh_accuracy(&engine, &model, "poking", 400);
    assert!(sliding >= 0.95, "sliding accuracy {sliding}");
    assert!((poking - 0.25).abs() <= 0.1, "poking accuracy {poking}");
    assert!(model.accuracy("sliding").unwrap() >= 0.95);
}

#[test]
fn classification_is_deterministic() {
    let engine = engine();
    let model = book_model(&engine, 3);
    assert_eq!(model, book_model(&engine, 3));
    let world = engine.sim.create_world(ScenarioId::Book, 9).unwrap();
    let exec = engine.apply_behaviour(world, "sliding", &Params::new(), &mut seeded_rng(9)).unwrap();
    let first = model.classify("sliding", &exec.record.sensor).unwrap();
    for _ in 0..10 {
        assert_eq!(model.clone().classify("sliding", &exec.record.sensor).unwrap(), first);
    }
    assert!(matches!(
        model.classify("pressing", &exec.record.sensor),
        Err(PlayingError::UnknownSensing(_))
    ));
}

#[test]
fn fresh_walks_choose_sensing_uniformly() {
    let engine = engine();
    let skill = engine.registry.skill("book_grasping").unwrap();
    let ecm = Ecm::build(
        "book_grasping",
        book_sensing(),
        book_model(&engine, 4),
        preparations_for(&engine, &skill),
        skill.basic_behaviour_id(),
        1.0,
    )
    .unwrap();
    let mut rng = seeded_rng(4);
    let walks = 1000;
    let sliding = (0..walks)
        .filter(|_| ecm.choose_sensing(WalkMode::Explore, &mut rng) == 0)
        .count() as f64
        / walks as f64;
    assert!((sliding - 0.5).abs() <= 0.05, "sliding chosen in {sliding} of walks");
    assert_eq!(ecm.to_document().layers.len(), 5);
    for p in ecm.sensing_probabilities() {
        assert_eq!(p, 0.5);
    }
}

#[test]
fn walked_paths_visit_four_clips() {
    let engine = engine();
    let mut clips = Vec::new();
    let config = PlayConfig {
        episodes: 20,
        ..PlayConfig::default()
    };
    play(&engine, "book_grasping", &config, |e| {
        let p = e.path.as_ref().unwrap();
        clips.push([&p.sensing, &p.percept, &p.prep, &p.basic].map(|s| !s.is_empty()));
    })
    .unwrap();
    assert_eq!(clips.len(), 20);
    assert!(clips.iter().all(|c| c.iter().all(|&present| present)));
}

#[test]
fn probabilities_stay_normalized() {
    runner(128)
        .run(
            &(prop::collection::vec(2usize..6, 1..4), 1usize..7, 0.0f64..0.95, any::<u64>()),
            |(states, preps, damping, seed)| {
                let mut ecm = synthetic_ecm(&states, preps);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..40 {
                    let path = random_path(&ecm, &mut rng);
                    ecm.update(&path, rng.random_bool(0.5), rng.random_range(0.1..5.0), damping).unwrap();
                    let mut sums = vec![ecm.sensing_probabilities().iter().sum::<f64>()];
                    for s in 0..ecm.sensing.len() {
                        for e in 0..ecm.percept_labels(s).len() {
                            sums.push(ecm.prep_probabilities(s, e).iter().sum());
                        }
                    }
                    for sum in sums {
                        prop_assert!((sum - 1.0).abs() <= 1e-12);
                    }
                    let h_min = ecm.h_min;
                    prop_assert!(ecm.h_prep.iter().flatten().flatten().all(|&h| h >= h_min));
                }
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn rewarded_edges_never_lose_probability() {
    runner(128)
        .run(
            &(prop::collection::vec(2usize..6, 1..4), 1usize..7, any::<u64>()),
            |(states, preps, seed)| {
                let mut ecm = synthetic_ecm(&states, preps);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..20 {
                    let path = random_path(&ecm, &mut rng);
                    ecm.update(&path, rng.random_bool(0.5), 1.0, 0.0).unwrap();
                }
                let path = random_path(&ecm, &mut rng);
                let before_prep = ecm.prep_probabilities(path.sensing, path.percept)[path.prep];
                let before_sensing = ecm.sensing_probabilities()[path.sensing];
                ecm.update(&path, true, rng.random_range(0.1..5.0), 0.0).unwrap();
                prop_assert!(ecm.prep_probabilities(path.sensing, path.percept)[path.prep] >= before_prep);
                prop_assert!(ecm.sensing_probabilities()[path.sensing] >= before_sensing);
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn worked_update_examples() {
    let mut ecm = synthetic_ecm(&[4], 5);
    let path = WalkPath { sensing: 0, percept: 0, prep: 0 };
    assert_eq!(ecm.prep_probabilities(0, 0)[0], 0.2);
    ecm.update(&path, true, 1.0, 0.0).unwrap();
    assert_eq!(ecm.prep_probabilities(0, 0)[0], 2.0 / 6.0);

    let snapshot = ecm.clone();
    ecm.update(&path, false, 1.0, 0.0).unwrap();
    assert_eq!(ecm, snapshot);

    let mut damped = synthetic_ecm(&[4], 5);
    damped.h_prep[0][0][0] = 3.0;
    damped.update(&path, false, 1.0, 0.5).unwrap();
    assert_eq!(damped.h_prep[0][0][0], 2.0);

    assert_eq!(synthetic_ecm(&[4, 3], 5).prep_edge_count(), 35);
    let foreign = WalkPath { sensing: 0, percept: 7, prep: 0 };
    assert!(matches!(ecm.update(&foreign, true, 1.0, 0.0), Err(PlayingError::PathMismatch(_))));
}

#[test]
fn playing_improves_success_across_seeds() {
    let mut improved = 0;
    for seed in 0..20 {
        let engine = engine();
        let config = PlayConfig {
            episodes: 300,
            seed,
            ..PlayConfig::default()
        };
        let report = play(&engine, "book_grasping", &config, |_| {}).unwrap();
        let early = report.curve.outcomes[..100].iter().filter(|&&s| s).count();
        let late = report.curve.outcomes[200..].iter().filter(|&&s| s).count();
        if late > early {
            improved += 1;
        }
    }
    // One-sided sign test: P(X >= 15) for X ~ Binomial(20, 1/2) is about 0.021.
    assert!(improved >= 15, "success improved for {improved} of 20 seeds");
}

#[test]
fn noiseless_tower_playing_converges_to_the_height_map() {
    let engine = Engine::new(Simulator::with_noise(0.0), None).unwrap();
    let config = PlayConfig {
        episodes: 200,
        seed: 7,
        ..PlayConfig::default()
    };
    let report = play(&engine, "tower_disassembly", &config, |_| {}).unwrap();
    let policy = report.ecm.greedy_policy("poking");
    let expected: Vec<(String, String)> = (1..=3)
        .map(|h| (format!("h{h}"), format!("repeat(pick_and_place, {h})")))
        .collect();
    assert_eq!(policy, expected);
}

#[test]
fn trained_book_grasping_rotates_before_grasping() {
    let engine = engine();
    let report = play(&engine, "book_grasping", &PlayConfig::default(), |_| {}).unwrap();
    assert!(report.promoted);
    let stored = engine.registry.skill("book_grasping").unwrap();
    assert!(stored.promoted);
    assert_eq!(stored.ecm.as_ref(), Some(&report.ecm));

    for (orientation, prep) in [(Orientation::Deg0, "b_void"), (Orientation::Deg90, "rotate_by(angle=-90)")] {
        let situation = Situation::with_attribute(ScenarioId::Book, 11, Attribute::Orientation(orientation));
        let world = situation.instantiate(&engine.sim.catalog).unwrap();
        let exec = engine.execute_skill("book_grasping", world, Some(situation), &mut seeded_rng(11)).unwrap();
        let path = exec.path.unwrap();
        assert!(exec.record.success);
        assert_eq!(report.ecm.sensing[path.sensing], "sliding");
        assert_eq!(report.ecm.preparations[path.prep].label(), prep);
    }
}

#[test]
fn invalid_play_requests_are_rejected() {
    let engine = engine();
    let bad = PlayConfig {
        reward: 0.0,
        ..PlayConfig::default()
    };
    assert!(matches!(play(&engine, "book_grasping", &bad, |_| {}), Err(PlayingError::InvalidConfig(_))));
    assert!(matches!(
        play(&engine, "simple_grasp", &PlayConfig::default(), |_| {}),
        Err(PlayingError::NotPlayable(_))
    ));
    assert!(play(&engine, "origami", &PlayConfig::default(), |_| {}).is_err());
}
