//! Application state and the operations shared by the HTTP API and the CLI.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use skillforge::diagnosis::{diagnose, Diagnoser, DiagnosisSession, DiagnosisStep, Strategy, NO_FAULT};
use skillforge::memory::{ColumnDefinition, ColumnType, ExecutionRecord, SchemaExtension, Store, TableDefinition};
use skillforge::playing::{play, EpisodeEvent, PlayConfig, PlayReport};
use skillforge::skill::catalog::DIAGNOSTIC_SKILLS;
use skillforge::skill::{ProgramAst, SkillError};
use skillforge::world::{seeded_rng, FaultSpec, ScenarioCatalog, ScenarioId, Simulator, Situation};
use skillforge::{DoaRecord, Engine, Execution};
use tokio::sync::RwLock;

use crate::config::{ServiceConfig, IN_MEMORY_STORE};
use crate::sessions::SessionHub;
use crate::ServiceError;

/// Owner of the service's tables in the experience memory.
pub const ARTIFACT_OWNER: &str = "skillforge-service";
pub const ARTIFACT_TABLE: &str = "artifacts";

/// Kinds of stored artifacts readable through `export`.
pub const CURVE_ARTIFACT: &str = "curve";
pub const BLAME_ARTIFACT: &str = "blame";

fn artifact_schema() -> SchemaExtension {
    let text = |name: &str| ColumnDefinition {
        name: name.into(),
        column_type: ColumnType::Text,
    };
    SchemaExtension {
        owner: ARTIFACT_OWNER.into(),
        version: 1,
        tables: vec![TableDefinition {
            name: ARTIFACT_TABLE.into(),
            columns: vec![text("kind"), text("name"), text("body")],
        }],
    }
}

/// A fault to inject before diagnosing: a bare function id selects a
/// hard failure, an object gives the full specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Injection {
    Function(String),
    Fault(FaultSpec),
}

impl Injection {
    pub fn spec(&self) -> FaultSpec {
        match self {
            Injection::Function(f) => FaultSpec::fail_hard(f.clone()),
            Injection::Fault(spec) => spec.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisRequest {
    pub budget: usize,
    #[serde(default)]
    pub inject: Option<Injection>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub strategy: Strategy,
}

/// Final result of a diagnosis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisOutcome {
    pub injected: Option<FaultSpec>,
    pub argmax: String,
    pub probability: f64,
    /// Hypotheses sorted by decreasing probability.
    pub blame: Vec<(String, f64)>,
    pub session: DiagnosisSession,
}

/// Per-step view of the blame distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlameSnapshot {
    pub step: usize,
    pub skill: String,
    pub success: bool,
    pub t_fail: Option<u32>,
    pub record_id: Option<i64>,
    pub argmax: String,
    pub probability: f64,
    pub posterior: Vec<(String, f64)>,
}

impl BlameSnapshot {
    pub fn new(step: &DiagnosisStep, hypotheses: &[String]) -> Self {
        let posterior: Vec<(String, f64)> = hypotheses.iter().cloned().zip(step.posterior.iter().copied()).collect();
        let (argmax, probability) = posterior
            .iter()
            .fold((NO_FAULT.to_string(), f64::NEG_INFINITY), |best, (h, p)| {
                if *p > best.1 {
                    (h.clone(), *p)
                } else {
                    best
                }
            });
        BlameSnapshot {
            step: step.step,
            skill: step.skill.clone(),
            success: step.success,
            t_fail: step.t_fail,
            record_id: step.record_id,
            argmax,
            probability,
            posterior,
        }
    }
}

/// Execution record without its matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub id: Option<i64>,
    pub subject: String,
    pub subject_kind: String,
    pub start_tick: u64,
    pub end_tick: u64,
    pub ticks: usize,
    pub success: bool,
    pub hardware_config: BTreeSet<String>,
    pub situation: Option<Situation>,
    pub failure: Option<String>,
}

impl From<&ExecutionRecord> for RecordSummary {
    fn from(r: &ExecutionRecord) -> Self {
        RecordSummary {
            id: r.id,
            subject: r.subject.clone(),
            subject_kind: r.subject_kind.as_str().to_string(),
            start_tick: r.start_tick,
            end_tick: r.end_tick,
            ticks: r.ticks(),
            success: r.success,
            hardware_config: r.hardware_config.clone(),
            situation: r.situation,
            failure: r.failure.clone(),
        }
    }
}

/// Engine, sessions and cached diagnosis models shared by every request.
#[derive(Debug)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub config: ServiceConfig,
    pub sessions: SessionHub,
    diagnoser: Mutex<Option<Arc<Diagnoser>>>,
    /// Diagnosis holds this exclusively while a fault is injected; every
    /// other execution holds it shared.
    fault_guard: RwLock<()>,
}

impl AppState {
    /// Opens the store, builds the engine and restores saved programs and
    /// skills. Returns the entries that could not be restored.
    pub fn open(config: ServiceConfig) -> Result<(Self, Vec<(String, SkillError)>), ServiceError> {
        config.validate()?;
        let mut sim = Simulator::with_noise(config.noise);
        if let Some(path) = &config.catalog {
            sim.catalog = ScenarioCatalog::load(path)?;
        }
        let store = if config.store == IN_MEMORY_STORE {
            Store::open_in_memory()?
        } else {
            Store::open(&config.store)?
        };
        store.install_schema(&artifact_schema())?;
        let (engine, skipped) = Engine::open(sim, store)?;
        let state = AppState {
            engine: Arc::new(engine),
            config,
            sessions: SessionHub::default(),
            diagnoser: Mutex::new(None),
            fault_guard: RwLock::new(()),
        };
        Ok((state, skipped))
    }

    pub fn store(&self) -> &Store {
        self.engine.store().expect("the service engine always has a store")
    }

    /// Test models of the diagnostic skills, trained on first use.
    pub fn diagnoser(&self) -> Result<Arc<Diagnoser>, ServiceError> {
        let mut cached = self.diagnoser.lock().expect("diagnoser cache");
        if let Some(d) = cached.as_ref() {
            return Ok(d.clone());
        }
        let skills: Vec<(String, ScenarioId)> = DIAGNOSTIC_SKILLS.iter().map(|(s, sc)| (s.to_string(), *sc)).collect();
        let mut rng = seeded_rng(self.config.training_seed);
        let trained = {
            let _shared = self.fault_guard.blocking_read();
            Diagnoser::train(
                &self.engine,
                self.config.diagnosis.clone(),
                &skills,
                self.config.training_runs,
                &mut rng,
            )?
        };
        let trained = Arc::new(trained);
        *cached = Some(trained.clone());
        Ok(trained)
    }

    /// Runs `ast` from the situation `(scenario, seed)`. The record is
    /// determined by the program, scenario and seed alone.
    pub fn run_program(
        &self,
        subject: &str,
        ast: &ProgramAst,
        scenario: ScenarioId,
        seed: u64,
    ) -> Result<Execution, ServiceError> {
        let situation = Situation::new(scenario, seed);
        let world = situation.instantiate(&self.engine.sim.catalog)?;
        let mut rng = seeded_rng(seed);
        let _shared = self.fault_guard.blocking_read();
        Ok(self.engine.interpret_program(subject, ast, world, Some(situation), &mut rng)?)
    }

    /// Plays a skill and stores its success curve.
    pub fn play_skill(
        &self,
        skill: &str,
        config: &PlayConfig,
        on_episode: impl FnMut(&EpisodeEvent),
    ) -> Result<PlayReport, ServiceError> {
        let report = {
            let _shared = self.fault_guard.blocking_read();
            play(&self.engine, skill, config, on_episode)?
        };
        self.save_artifact(CURVE_ARTIFACT, skill, &report.curve.to_csv())?;
        Ok(report)
    }

    /// Runs a skill from every value of its scenario's situation attribute.
    pub fn probe_doa(&self, skill: &str, seed: u64) -> Result<DoaRecord, ServiceError> {
        let situations = self.engine.attribute_situations(skill, seed)?;
        let _shared = self.fault_guard.blocking_read();
        Ok(self.engine.probe_doa(skill, &situations)?)
    }

    /// Injects the requested fault, if any, and localizes it. The fault is
    /// cleared before returning and the outcome is stored under `label`.
    pub fn run_diagnosis(
        &self,
        label: &str,
        request: &DiagnosisRequest,
        mut on_snapshot: impl FnMut(&BlameSnapshot),
    ) -> Result<DiagnosisOutcome, ServiceError> {
        let diagnoser = self.diagnoser()?;
        let injected = request.inject.as_ref().map(Injection::spec);
        let hypotheses: Vec<String> = self
            .engine
            .sim
            .functions
            .ids()
            .iter()
            .cloned()
            .chain(std::iter::once(NO_FAULT.to_string()))
            .collect();
        let result = {
            let _exclusive = self.fault_guard.blocking_write();
            if let Some(spec) = &injected {
                self.engine.sim.inject_fault(spec.clone())?;
            }
            let mut rng = seeded_rng(request.seed);
            let result = diagnose(&self.engine, &diagnoser, request.budget, request.strategy, &mut rng, |step| {
                on_snapshot(&BlameSnapshot::new(step, &hypotheses))
            });
            self.engine.sim.clear_faults();
            result?
        };
        let (blame, session) = result;
        let (argmax, probability) = blame.argmax();
        let outcome = DiagnosisOutcome {
            injected,
            argmax: argmax.to_string(),
            probability,
            blame: blame.report(),
            session,
        };
        let body = serde_json::to_string(&outcome).expect("outcome serializes");
        self.save_artifact(BLAME_ARTIFACT, label, &body)?;
        Ok(outcome)
    }

    pub fn save_artifact(&self, kind: &str, name: &str, body: &str) -> Result<i64, ServiceError> {
        Ok(self
            .store()
            .insert_row(ARTIFACT_TABLE, &[("kind", kind), ("name", name), ("body", body)])?)
    }

    /// Body of the newest artifact of `kind`, restricted to `name` if given.
    pub fn latest_artifact(&self, kind: &str, name: Option<&str>) -> Result<Option<String>, ServiceError> {
        let rows = self.store().rows(ARTIFACT_TABLE, &["name", "body"], Some(("kind", kind)))?;
        Ok(rows
            .into_iter()
            .find(|r| name.is_none() || r[0].as_deref() == name)
            .and_then(|mut r| r.pop().flatten()))
    }
}
