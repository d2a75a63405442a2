//! The diagnosis loop: select a test, execute it, update the blame.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{
    select_next_skill, BlameDistribution, Candidate, DiagnosisConfig, DiagnosisError, Fpf, Mom, Observation,
};
use crate::engine::Engine;
use crate::memory::ExecutionRecord;
use crate::world::{ScenarioId, SimRng, Situation};

/// Trained models and coverage of one test skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillModel {
    pub skill: String,
    pub scenario: ScenarioId,
    pub mom: Mom,
    pub fpf: Fpf,
}

/// How the next test is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    InformationGain,
    UniformRandom,
}

/// Runs `skill` `n` times from fresh situations of `scenario` and returns
/// every record.
pub fn collect_training_records(
    engine: &Engine,
    skill: &str,
    scenario: ScenarioId,
    n: usize,
    rng: &mut SimRng,
) -> Result<Vec<ExecutionRecord>, DiagnosisError> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let situation = Situation::new(scenario, rng.next_u64());
        let world = situation.instantiate(&engine.sim.catalog)?;
        out.push(engine.execute_skill(skill, world, Some(situation), rng)?.record);
    }
    Ok(out)
}

/// Success models for a set of test skills.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnoser {
    pub config: DiagnosisConfig,
    pub models: BTreeMap<String, SkillModel>,
}

impl Diagnoser {
    /// Trains from records already in hand, keyed by skill.
    pub fn from_records(
        config: DiagnosisConfig,
        skills: &[(String, ScenarioId)],
        records: &BTreeMap<String, Vec<ExecutionRecord>>,
    ) -> Result<Self, DiagnosisError> {
        config.validate()?;
        let mut models = BTreeMap::new();
        for (skill, scenario) in skills {
            let recs = records.get(skill).map(Vec::as_slice).unwrap_or(&[]);
            models.insert(
                skill.clone(),
                SkillModel {
                    skill: skill.clone(),
                    scenario: *scenario,
                    mom: Mom::train(skill, recs, &config)?,
                    fpf: Fpf::train(skill, recs, &config)?,
                },
            );
        }
        Ok(Diagnoser { config, models })
    }

    /// Executes every skill `runs` times on the fault-free simulator and
    /// trains on the successful executions.
    pub fn train(
        engine: &Engine,
        config: DiagnosisConfig,
        skills: &[(String, ScenarioId)],
        runs: usize,
        rng: &mut SimRng,
    ) -> Result<Self, DiagnosisError> {
        let mut records = BTreeMap::new();
        for (skill, scenario) in skills {
            records.insert(skill.clone(), collect_training_records(engine, skill, *scenario, runs, rng)?);
        }
        Diagnoser::from_records(config, skills, &records)
    }

    fn candidates(&self, engine: &Engine) -> Result<Vec<Candidate>, DiagnosisError> {
        self.models
            .keys()
            .map(|s| {
                Ok(Candidate {
                    skill: s.clone(),
                    coverage: engine.skill_coverage(s)?,
                })
            })
            .collect()
    }
}

/// One executed test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisStep {
    pub step: usize,
    pub skill: String,
    pub situation: Situation,
    pub success: bool,
    pub t_fail: Option<u32>,
    pub low_confidence: bool,
    pub record_id: Option<i64>,
    /// Posterior after this observation, aligned with the hypotheses.
    pub posterior: Vec<f64>,
}

/// Full log of a diagnosis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisSession {
    pub strategy: Strategy,
    pub budget: usize,
    pub hypotheses: Vec<String>,
    pub prior: Vec<f64>,
    pub steps: Vec<DiagnosisStep>,
}

impl DiagnosisSession {
    pub fn remaining(&self) -> usize {
        self.budget - self.steps.len()
    }

    pub fn posterior(&self) -> BlameDistribution {
        BlameDistribution {
            hypotheses: self.hypotheses.clone(),
            probabilities: self.steps.last().map(|s| s.posterior.clone()).unwrap_or_else(|| self.prior.clone()),
        }
    }

    /// One row per step: skill, outcome, failure tick and the posterior.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,skill,success,t_fail,low_confidence");
        for h in &self.hypotheses {
            out.push(',');
            out.push_str(h);
        }
        out.push('\n');
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{}",
                s.step,
                s.skill,
                s.success,
                s.t_fail.map(|t| t.to_string()).unwrap_or_default(),
                s.low_confidence
            ));
            for p in &s.posterior {
                out.push_str(&format!(",{p:.12}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("session serializes")
    }
}

/// Runs tests until the budget is spent or one hypothesis reaches the
/// certainty threshold. Every test starts from a fresh situation of its
/// skill's scenario.
pub fn diagnose(
    engine: &Engine,
    diagnoser: &Diagnoser,
    budget: usize,
    strategy: Strategy,
    rng: &mut SimRng,
    mut on_step: impl FnMut(&DiagnosisStep),
) -> Result<(BlameDistribution, DiagnosisSession), DiagnosisError> {
    if budget == 0 {
        return Err(DiagnosisError::ZeroBudget);
    }
    let candidates = diagnoser.candidates(engine)?;
    if candidates.is_empty() {
        return Err(DiagnosisError::NoCandidates);
    }
    let config = &diagnoser.config;
    let mut blame = BlameDistribution::uniform(engine.sim.functions.ids());
    let mut session = DiagnosisSession {
        strategy,
        budget,
        hypotheses: blame.hypotheses.clone(),
        prior: blame.probabilities.clone(),
        steps: Vec::new(),
    };
    while session.steps.len() < budget && blame.argmax().1 < config.certainty {
        let skill = match strategy {
            Strategy::InformationGain => select_next_skill(&blame, &candidates, config)?,
            Strategy::UniformRandom => candidates.choose(rng).expect("candidates exist").skill.clone(),
        };
        let model = &diagnoser.models[&skill];
        let situation = Situation::new(model.scenario, rng.next_u64());
        let world = situation.instantiate(&engine.sim.catalog)?;
        let exec = engine.execute_skill(&skill, world, Some(situation), rng)?;
        let observation = Observation::from(&exec.record);
        let (posterior, fail_time) = blame.observe(&observation, &model.mom, &model.fpf, config)?;
        blame = posterior;
        let step = DiagnosisStep {
            step: session.steps.len() + 1,
            skill,
            situation,
            success: observation.success,
            t_fail: fail_time.map(|f| f.tick),
            low_confidence: fail_time.is_some_and(|f| f.low_confidence),
            record_id: exec.record.id,
            posterior: blame.probabilities.clone(),
        };
        on_step(&step);
        session.steps.push(step);
    }
    Ok((blame, session))
}
