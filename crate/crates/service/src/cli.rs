//! The `skillforge` command line.
//!
//! Exit codes: 0 on success, 1 on a domain failure such as a failed
//! execution, 2 on a usage or configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use skillforge::diagnosis::Strategy;
use skillforge::playing::PlayingError;
use skillforge::skill::{ProgramAst, SkillError};
use skillforge::world::{FaultSpec, ScenarioId};

use crate::config::ServiceConfig;
use crate::ops::{AppState, DiagnosisRequest, Injection, BLAME_ARTIFACT, CURVE_ARTIFACT};
use crate::ServiceError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "skillforge", version, about = "Robot skill workbench over a simulated tabletop")]
pub struct Cli {
    /// Configuration file; the SKILLFORGE_CONFIG variable takes precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Experience database, overriding the configured one.
    #[arg(long, global = true)]
    pub store: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a program document against a scenario.
    Run(RunArgs),
    /// Train a skill by autonomous playing.
    Play(PlayArgs),
    /// Localize a software fault by running diagnostic skills.
    Diagnose(DiagnoseArgs),
    /// Run a skill from every value of its scenario's situation attribute.
    ProbeDoa(ProbeArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Print stored artifacts.
    #[command(subcommand)]
    Export(ExportCommand),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Program AST as JSON.
    #[arg(long)]
    pub program: PathBuf,
    #[arg(long)]
    pub scenario: ScenarioId,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Subject recorded for the execution; defaults to the file name up to
    /// its first dot.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    #[arg(long)]
    pub skill: String,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Success curve as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultModeArg {
    FailHard,
    Degrade,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    InformationGain,
    UniformRandom,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::InformationGain => Strategy::InformationGain,
            StrategyArg::UniformRandom => Strategy::UniformRandom,
        }
    }
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Instrumented function to break before diagnosing.
    #[arg(long)]
    pub inject: Option<String>,
    #[arg(long, value_enum, default_value_t = FaultModeArg::FailHard)]
    pub mode: FaultModeArg,
    /// Sensor bias of a degrade fault.
    #[arg(long, default_value_t = 5.0)]
    pub bias: f64,
    #[arg(long, default_value_t = 15)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = StrategyArg::InformationGain)]
    pub strategy: StrategyArg,
    /// Full diagnosis log as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub skill: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Subcommand)]
pub enum ExportCommand {
    /// Trained ECM of a skill as JSON.
    Ecm {
        #[arg(long)]
        skill: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Latest success curve of a skill as CSV.
    Curve {
        #[arg(long)]
        skill: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Latest diagnosis outcome as JSON.
    Blame {
        /// Label of the diagnosis run: a session id or `cli-<seed>`.
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Usage errors name something that does not exist or cannot be read;
/// everything else is a domain failure.
pub fn exit_code(e: &ServiceError) -> i32 {
    let usage_skill = |s: &SkillError| {
        matches!(
            s,
            SkillError::UnknownSkill(_) | SkillError::UnknownBehaviour(_) | SkillError::Parse(_) | SkillError::InvalidProgram(_)
        )
    };
    match e {
        ServiceError::Config(_) | ServiceError::BadRequest(_) | ServiceError::NotFound(_) | ServiceError::Io(_) => {
            EXIT_USAGE
        }
        ServiceError::Skill(s) | ServiceError::Playing(PlayingError::Skill(s)) if usage_skill(s) => EXIT_USAGE,
        ServiceError::Playing(PlayingError::InvalidConfig(_)) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn open_state(cli: &Cli, err: &mut dyn Write) -> Result<AppState, ServiceError> {
    let mut config = ServiceConfig::load(cli.config.as_deref())?;
    if let Some(store) = &cli.store {
        config.store = store.clone();
    }
    let (state, skipped) = AppState::open(config)?;
    for (id, e) in skipped {
        let _ = writeln!(err, "warning: could not restore {id}: {e}");
    }
    Ok(state)
}

fn emit(out: &mut dyn Write, path: Option<&Path>, body: &str) -> Result<(), ServiceError> {
    match path {
        Some(p) => std::fs::write(p, body)?,
        None => out.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, ServiceError> {
    let state = open_state(&cli, err)?;
    match cli.command {
        Command::Run(args) => {
            let text = std::fs::read_to_string(&args.program)
                .map_err(|e| ServiceError::BadRequest(format!("{}: {e}", args.program.display())))?;
            let ast = ProgramAst::from_json(&text)?;
            let name = args.name.unwrap_or_else(|| program_name(&args.program));
            let exec = state.run_program(&name, &ast, args.scenario, args.seed)?;
            let id = exec.record.id.map_or_else(|| "-".to_string(), |i| i.to_string());
            writeln!(
                out,
                "execution {id}: {name} in {} (seed {}) {} after {} ticks",
                args.scenario,
                args.seed,
                if exec.success() { "succeeded" } else { "failed" },
                exec.record.ticks()
            )?;
            if let Some(abort) = &exec.abort {
                writeln!(out, "aborted: {abort}")?;
            }
            Ok(if exec.success() { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Play(args) => {
            let mut config = state.config.playing.clone();
            if let Some(e) = args.episodes {
                config.episodes = e;
            }
            if let Some(s) = args.seed {
                config.seed = s;
            }
            let report = state.play_skill(&args.skill, &config, |_| {})?;
            if let Some(path) = &args.out {
                std::fs::write(path, report.curve.to_csv())?;
            }
            let ecm = &report.ecm;
            let sensing = &ecm.sensing[ecm.greedy_sensing()];
            writeln!(
                out,
                "{}: {} episodes, success rate {:.3}, last {} episodes {:.3}, promoted {}",
                report.skill,
                report.curve.len(),
                report.curve.running_mean(report.curve.len()),
                config.promotion_window,
                report.curve.trailing_rate(config.promotion_window),
                report.promoted
            )?;
            writeln!(out, "greedy sensing: {sensing}")?;
            for (percept, prep) in ecm.greedy_policy(sensing) {
                writeln!(out, "  {percept} -> {prep}")?;
            }
            Ok(EXIT_OK)
        }
        Command::Diagnose(args) => {
            let inject = args.inject.map(|f| match args.mode {
                FaultModeArg::FailHard => Injection::Function(f),
                FaultModeArg::Degrade => Injection::Fault(FaultSpec::degrade_sensors(f, args.bias)),
            });
            if let Some(i) = &inject {
                let f = i.spec().function_id;
                if !state.engine.sim.functions.contains(&f) {
                    return Err(ServiceError::BadRequest(format!("unknown function {f:?}")));
                }
            }
            let request = DiagnosisRequest {
                budget: args.budget,
                inject,
                seed: args.seed,
                strategy: args.strategy.into(),
            };
            let label = format!("cli-{}", args.seed);
            let outcome = state.run_diagnosis(&label, &request, |_| {})?;
            if let Some(path) = &args.out {
                std::fs::write(path, serde_json::to_string_pretty(&outcome).expect("outcome serializes"))?;
            }
            writeln!(
                out,
                "argmax: {} (p = {:.4}) after {} tests",
                outcome.argmax,
                outcome.probability,
                outcome.session.steps.len()
            )?;
            for (h, p) in outcome.blame.iter().take(5) {
                writeln!(out, "  {h:<24} {p:.4}")?;
            }
            Ok(EXIT_OK)
        }
        Command::ProbeDoa(args) => {
            let record = state.probe_doa(&args.skill, args.seed)?;
            for p in &record.probed {
                writeln!(out, "{:<16} {}", p.situation.label(), if p.success { "ok" } else { "failed" })?;
            }
            writeln!(out, "{}/{} situations succeeded", record.successes(), record.probed.len())?;
            Ok(if record.successes() == record.probed.len() { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Serve(args) => {
            let mut state = state;
            if let Some(port) = args.port {
                state.config.port = port;
            }
            writeln!(out, "listening on port {}", state.config.port)?;
            out.flush()?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(crate::api::serve(state))?;
            Ok(EXIT_OK)
        }
        Command::Export(what) => {
            match what {
                ExportCommand::Ecm { skill, out: path } => {
                    let s = state.engine.registry.skill(&skill)?;
                    let ecm = s
                        .ecm
                        .as_ref()
                        .ok_or_else(|| ServiceError::NotFound(format!("trained ECM of {skill:?}")))?;
                    let body = serde_json::to_string_pretty(&ecm.to_document()).expect("document serializes");
                    emit(out, path.as_deref(), &(body + "\n"))?;
                }
                ExportCommand::Curve { skill, out: path } => {
                    let body = state
                        .latest_artifact(CURVE_ARTIFACT, Some(&skill))?
                        .ok_or_else(|| ServiceError::NotFound(format!("success curve of {skill:?}")))?;
                    emit(out, path.as_deref(), &body)?;
                }
                ExportCommand::Blame { label, out: path } => {
                    let body = state
                        .latest_artifact(BLAME_ARTIFACT, label.as_deref())?
                        .ok_or_else(|| ServiceError::NotFound("diagnosis outcome".into()))?;
                    emit(out, path.as_deref(), &(body + "\n"))?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn program_name(path: &Path) -> String {
    path.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.split('.').next())
        .filter(|n| !n.is_empty())
        .unwrap_or("program")
        .to_string()
}
