use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use skillforge::diagnosis::{
    diagnose, expected_information_gain, likelihood, select_next_skill, BlameDistribution, Candidate, Diagnoser,
    DiagnosisConfig, DiagnosisError, FailTime, Fpf, Mom, Observation, Strategy as SelectionStrategy, NO_FAULT,
};
use skillforge::memory::{CallProfileMatrix, ExecutionRecord, SensorMatrix, SubjectKind};
use skillforge::world::{seeded_rng, Simulator};
use skillforge::Engine;

const CHANNELS: usize = 2;
const TICKS: usize = 20;
const SIGMA: f64 = 0.5;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn functions() -> Vec<String> {
    vec!["f".to_string(), "g".to_string()]
}

/// Base signal of channel `c` at tick `t`.
fn base(c: usize, t: usize) -> f64 {
    (c as f64 + 1.0) * (t as f64 * 0.3).sin()
}

fn sensor(values: impl Fn(usize, usize) -> f64) -> SensorMatrix {
    let channels = (0..CHANNELS).map(|c| format!("ch{c}")).collect();
    let cells = (0..CHANNELS).flat_map(|c| (0..TICKS).map(move |t| (c, t))).map(|(c, t)| values(c, t)).collect();
    SensorMatrix::new(channels, TICKS, cells).unwrap()
}

/// `f` active on ticks 2..=5, `g` never.
fn profile() -> CallProfileMatrix {
    let mut counts = vec![0u32; 2 * TICKS];
    counts[2..=5].iter_mut().for_each(|c| *c = 1);
    CallProfileMatrix::new(functions(), TICKS, counts).unwrap()
}

fn record(sensor: SensorMatrix, success: bool) -> ExecutionRecord {
    ExecutionRecord {
        id: None,
        subject: "probe".into(),
        subject_kind: SubjectKind::Skill,
        start_tick: 0,
        end_tick: TICKS as u64,
        success,
        sensor,
        profile: profile(),
        hardware_config: BTreeSet::new(),
        situation: None,
        failure: None,
    }
}

fn noisy(rng: &mut ChaCha8Rng) -> SensorMatrix {
    let noise = Normal::new(0.0, SIGMA).unwrap();
    let draws: Vec<f64> = (0..CHANNELS * TICKS).map(|_| noise.sample(rng)).collect();
    sensor(|c, t| base(c, t) + draws[c * TICKS + t])
}

fn trained_mom(seed: u64) -> Mom {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records: Vec<ExecutionRecord> = (0..30).map(|_| record(noisy(&mut rng), true)).collect();
    Mom::train("probe", &records, &DiagnosisConfig::default()).unwrap()
}

fn observation(success: bool, profile: CallProfileMatrix) -> Observation {
    Observation {
        skill: "probe".into(),
        success,
        sensor: sensor(base),
        profile,
    }
}

fn untrained_fpf() -> Fpf {
    Fpf {
        skill: "probe".into(),
        functions: vec![],
        ticks: 0,
        mean: vec![],
        variance: vec![],
    }
}

#[test]
fn identical_records_give_their_column_and_the_variance_floor() {
    let config = DiagnosisConfig::default();
    let records: Vec<ExecutionRecord> = (0..20).map(|_| record(sensor(base), true)).collect();
    let mom = Mom::train("probe", &records, &config).unwrap();
    for t in 0..TICKS {
        for c in 0..CHANNELS {
            assert!((mom.mean[t * CHANNELS + c] - base(c, t)).abs() < 1e-12);
            assert_eq!(mom.variance[t * CHANNELS + c], config.variance_floor);
        }
    }
    assert!(matches!(
        Mom::train("probe", &records[..9], &config),
        Err(DiagnosisError::InsufficientRecords { found: 9, .. })
    ));
    let failures: Vec<ExecutionRecord> = (0..20).map(|_| record(sensor(base), false)).collect();
    assert!(Mom::train("probe", &failures, &config).is_err());
}

#[test]
fn noisy_training_recovers_the_base_signal() {
    let mom = trained_mom(1);
    let worst = (0..TICKS * CHANNELS)
        .map(|k| (mom.mean[k] - base(k % CHANNELS, k / CHANNELS)).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 0.5, "largest mean error {worst}");
    let average = (0..TICKS * CHANNELS)
        .map(|k| (mom.mean[k] - base(k % CHANNELS, k / CHANNELS)).abs())
        .sum::<f64>()
        / (TICKS * CHANNELS) as f64;
    assert!(average <= 0.2, "average mean error {average}");
}

#[test]
fn fail_time_examples() {
    let mom = trained_mom(2);
    let nominal = mom.estimate_fail_time(&sensor(base)).unwrap();
    assert_eq!(
        nominal,
        FailTime {
            tick: TICKS as u32 - 1,
            low_confidence: true
        }
    );
    let spike = mom
        .estimate_fail_time(&sensor(|c, t| base(c, t) + if t == 3 { 10.0 } else { 0.0 }))
        .unwrap();
    assert_eq!(spike.tick, 3);
    assert!(!spike.low_confidence);
    let shifted = mom
        .estimate_fail_time(&sensor(|c, t| base(c, t) + if t >= 12 { 5.0 } else { 0.0 }))
        .unwrap();
    assert!((12..=14).contains(&shifted.tick), "{shifted:?}");
    let wrong_channels = SensorMatrix::new(vec!["other".into()], 1, vec![0.0]).unwrap();
    assert!(matches!(mom.estimate_fail_time(&wrong_channels), Err(DiagnosisError::ChannelMismatch(_))));
}

#[test]
fn biased_sensors_are_localized_within_two_ticks() {
    let mom = trained_mom(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trials = 200;
    let mut within = 0;
    for _ in 0..trials {
        let onset = rng.random_range(0..TICKS);
        let bias = rng.random_range(5.0..8.0) * SIGMA;
        let clean = noisy(&mut rng);
        let degraded = sensor(|c, t| clean.get(c, t) + if t >= onset { bias } else { 0.0 });
        let tick = mom.estimate_fail_time(&degraded).unwrap().tick as usize;
        if (onset..=onset + 2).contains(&tick) {
            within += 1;
        }
    }
    assert!(within as f64 / trials as f64 >= 0.95, "{within}/{trials}");
}

#[test]
fn likelihood_examples() {
    let config = DiagnosisConfig::default();
    let fpf = untrained_fpf();
    let failed = observation(false, profile());
    let succeeded = observation(true, profile());
    let at = |tick| Some(FailTime { tick, low_confidence: false });
    assert_eq!(likelihood(&failed, "g", at(5), &fpf, &config), 0.01);
    assert_eq!(likelihood(&succeeded, "f", None, &fpf, &config), 0.1);
    assert_eq!(likelihood(&succeeded, "g", None, &fpf, &config), 0.9);
    assert_eq!(likelihood(&succeeded, NO_FAULT, None, &fpf, &config), 0.9);
    assert_eq!(likelihood(&failed, NO_FAULT, at(5), &fpf, &config), 0.01);

    let near = likelihood(&failed, "f", at(5), &fpf, &config);
    let far = likelihood(&failed, "f", at(15), &fpf, &config);
    assert_eq!(near, 1.0);
    assert!((near / far - (10.0 / config.lambda_t).exp()).abs() < 1e-9);
}

#[test]
fn blame_update_examples() {
    let prior = BlameDistribution::uniform(&functions());
    let posterior = prior.update(&[0.8, 0.1, 0.1]).unwrap();
    for (p, expected) in posterior.probabilities.iter().zip([0.8, 0.1, 0.1]) {
        assert!((p - expected).abs() < 1e-15);
    }
    let skewed = prior.update(&[0.5, 0.3, 0.2]).unwrap();
    let unchanged = skewed.update(&[0.4, 0.4, 0.4]).unwrap();
    for (p, q) in unchanged.probabilities.iter().zip(&skewed.probabilities) {
        assert!((p - q).abs() < 1e-15);
    }
    assert!(matches!(prior.update(&[1.0]), Err(DiagnosisError::HypothesisMismatch { .. })));
}

fn distribution(weights: Vec<f64>) -> BlameDistribution {
    let hypotheses: Vec<String> = (0..weights.len() - 1).map(|i| format!("f{i}")).chain([NO_FAULT.to_string()]).collect();
    let total: f64 = weights.iter().sum();
    BlameDistribution {
        hypotheses,
        probabilities: weights.iter().map(|w| w / total).collect(),
    }
}

fn weights_and_likelihoods() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (2usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(prop::collection::vec(0.01f64..1.0, n), 1..25),
        )
    })
}

#[test]
fn posteriors_are_distributions_and_match_the_batch_product() {
    runner(256)
        .run(&weights_and_likelihoods(), |(weights, sequence)| {
            let mut blame = distribution(weights.clone());
            let mut product: Vec<f64> = blame.probabilities.clone();
            for likelihoods in &sequence {
                blame = blame.update(likelihoods).unwrap();
                prop_assert!(blame.probabilities.iter().all(|&p| (0.0..=1.0).contains(&p)));
                prop_assert!((blame.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                product.iter_mut().zip(likelihoods).for_each(|(p, l)| *p *= l);
            }
            let total: f64 = product.iter().sum();
            for (p, q) in blame.probabilities.iter().zip(&product) {
                prop_assert!((p - q / total).abs() <= 1e-9);
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn rescaled_likelihoods_rank_hypotheses_identically() {
    runner(256)
        .run(&(weights_and_likelihoods(), 1e-3f64..1e3), |((weights, sequence), scale)| {
            let mut plain = distribution(weights.clone());
            let mut scaled = distribution(weights);
            for likelihoods in &sequence {
                plain = plain.update(likelihoods).unwrap();
                let rescaled: Vec<f64> = likelihoods.iter().map(|l| l * scale).collect();
                scaled = scaled.update(&rescaled).unwrap();
            }
            for (p, q) in plain.probabilities.iter().zip(&scaled.probabilities) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
            let names = |b: &BlameDistribution| b.report().into_iter().map(|(h, _)| h).collect::<Vec<_>>();
            prop_assert_eq!(names(&plain), names(&scaled));
            Ok(())
        })
        .unwrap();
}

#[test]
fn rescaled_success_constants_keep_the_ranking() {
    runner(64)
        .run(&(1usize..8, 0.1f64..10.0), |(successes, scale)| {
            let base = DiagnosisConfig::default();
            let scaled = DiagnosisConfig {
                epsilon_bg: base.epsilon_bg * scale,
                beta_low: base.beta_low * scale,
                beta_high: base.beta_high * scale,
                ..base.clone()
            };
            let fpf = untrained_fpf();
            let o = observation(true, profile());
            let mut a = BlameDistribution::uniform(&functions());
            let mut b = a.clone();
            for _ in 0..successes {
                a = a.update(&a.likelihoods(&o, None, &fpf, &base)).unwrap();
                b = b.update(&b.likelihoods(&o, None, &fpf, &scaled)).unwrap();
            }
            prop_assert_eq!(a.report().into_iter().map(|r| r.0).collect::<Vec<_>>(), b.report().into_iter().map(|r| r.0).collect::<Vec<_>>());
            Ok(())
        })
        .unwrap();
}

#[test]
fn successes_covering_a_function_wash_out_its_blame() {
    runner(64)
        .run(&(prop::collection::vec(0.01f64..1.0, 3), 1usize..15), |(weights, k)| {
            let config = DiagnosisConfig::default();
            let fpf = untrained_fpf();
            let mom = trained_mom(4);
            let mut blame = BlameDistribution {
                hypotheses: vec!["f".into(), "g".into(), NO_FAULT.into()],
                probabilities: {
                    let total: f64 = weights.iter().sum();
                    weights.iter().map(|w| w / total).collect()
                },
            };
            let o = observation(true, profile());
            let mut last = blame.probability("f").unwrap();
            for _ in 0..k {
                blame = blame.observe(&o, &mom, &fpf, &config).unwrap().0;
                let now = blame.probability("f").unwrap();
                prop_assert!(now < last);
                last = now;
            }
            Ok(())
        })
        .unwrap();
}

/// Expected information gain by enumerating the two test outcomes directly.
fn enumerated_gain(prior: &[f64], covers: &[bool], config: &DiagnosisConfig) -> f64 {
    let entropy = |p: &[f64]| -> f64 { p.iter().filter(|&&x| x > 0.0).map(|x| -x * x.ln()).sum() };
    let mut expected = 0.0;
    for failed in [true, false] {
        let joint: Vec<f64> = prior
            .iter()
            .zip(covers)
            .map(|(p, &c)| {
                let fail = if c { config.rho } else { config.rho_0 };
                p * if failed { fail } else { 1.0 - fail }
            })
            .collect();
        let mass: f64 = joint.iter().sum();
        let posterior: Vec<f64> = joint.iter().map(|j| j / mass).collect();
        expected += mass * entropy(&posterior);
    }
    entropy(prior) - expected
}

fn candidate(skill: &str, coverage: &[&str]) -> Candidate {
    Candidate {
        skill: skill.into(),
        coverage: coverage.iter().map(|s| s.to_string()).collect(),
    }
}

#[test]
fn selection_examples() {
    let config = DiagnosisConfig::default();
    let two = BlameDistribution {
        hypotheses: vec!["f".into(), "g".into(), NO_FAULT.into()],
        probabilities: vec![0.5, 0.5, 0.0],
    };
    let splits = candidate("splits", &["f"]);
    let both = candidate("both", &["f", "g"]);
    let neither = candidate("neither", &[]);
    let gain = |c: &Candidate| expected_information_gain(&two, c, &config);
    let oracle = |covers: &[bool]| enumerated_gain(&two.probabilities, covers, &config);
    assert!((gain(&splits) - oracle(&[true, false, false])).abs() < 1e-9);
    assert!(gain(&both).abs() < 1e-12 && oracle(&[true, true, false]).abs() < 1e-12);
    assert!(gain(&splits) > gain(&both));
    assert!(gain(&splits) > gain(&neither));
    assert_eq!(select_next_skill(&two, &[both.clone(), splits.clone(), neither], &config).unwrap(), "splits");

    let suspect = BlameDistribution {
        hypotheses: vec!["f".into(), "g".into(), NO_FAULT.into()],
        probabilities: vec![0.9, 0.05, 0.05],
    };
    assert_eq!(
        select_next_skill(&suspect, &[candidate("misses", &["g"]), candidate("hits", &["f"])], &config).unwrap(),
        "hits"
    );
    assert_eq!(
        select_next_skill(&suspect, &[candidate("zeta", &["f"]), candidate("alpha", &["f"])], &config).unwrap(),
        "alpha"
    );
    assert!(matches!(select_next_skill(&suspect, &[], &config), Err(DiagnosisError::NoCandidates)));
}

#[test]
fn information_gain_matches_enumeration() {
    runner(256)
        .run(
            &(2usize..10).prop_flat_map(|n| (prop::collection::vec(0.01f64..1.0, n), prop::collection::vec(any::<bool>(), n))),
            |(weights, covers)| {
                let config = DiagnosisConfig::default();
                let blame = distribution(weights);
                let coverage: Vec<&str> = blame
                    .hypotheses
                    .iter()
                    .zip(&covers)
                    .filter(|(h, &c)| c && h.as_str() != NO_FAULT)
                    .map(|(h, _)| h.as_str())
                    .collect();
                let mut effective = covers.clone();
                *effective.last_mut().unwrap() = false;
                let gain = expected_information_gain(&blame, &candidate("t", &coverage), &config);
                prop_assert!((gain - enumerated_gain(&blame.probabilities, &effective, &config)).abs() <= 1e-9);
                prop_assert!(gain >= -1e-12);
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn diagnosis_sessions_stop_and_report() {
    let engine = Engine::new(Simulator::default(), None).unwrap();
    let skills = [("simple_grasp".to_string(), skillforge::world::ScenarioId::Flat)];
    let diagnoser = Diagnoser::train(&engine, DiagnosisConfig::default(), &skills, 20, &mut seeded_rng(0)).unwrap();
    assert!(matches!(
        diagnose(&engine, &diagnoser, 0, SelectionStrategy::InformationGain, &mut seeded_rng(1), |_| {}),
        Err(DiagnosisError::ZeroBudget)
    ));
    let mut steps = 0;
    let (blame, session) =
        diagnose(&engine, &diagnoser, 3, SelectionStrategy::InformationGain, &mut seeded_rng(1), |_| steps += 1).unwrap();
    assert!(session.steps.len() <= 3);
    assert_eq!(steps, session.steps.len());
    assert_eq!(session.posterior(), blame);
    assert_eq!(session.to_csv().lines().count(), session.steps.len() + 1);
    assert!(matches!(
        Diagnoser::train(&engine, DiagnosisConfig::default(), &skills, 3, &mut seeded_rng(0)),
        Err(DiagnosisError::InsufficientRecords { .. })
    ));
}
