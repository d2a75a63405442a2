//! The `/v1` HTTP API with server-sent event streams for sessions.

use std::collections::BTreeSet;
use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use skillforge::diagnosis::DiagnosisError;
use skillforge::memory::ExecutionFilter;
use skillforge::playing::{PlayConfig, PlayingError};
use skillforge::skill::{BehaviourDescriptor, PlayingSpec, ProgramAst, Skill, SkillError};
use skillforge::world::{HardwareSpec, ScenarioId};

use crate::ops::{AppState, BlameSnapshot, DiagnosisRequest, RecordSummary};
use crate::sessions::{EventEnvelope, EventKind, SessionKind};
use crate::ServiceError;

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ServiceError>;

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        fn skill_status(e: &SkillError) -> StatusCode {
            match e {
                SkillError::UnknownBehaviour(_) | SkillError::UnknownSkill(_) | SkillError::NotAProgram(_) => {
                    StatusCode::NOT_FOUND
                }
                SkillError::DuplicateBehaviour(_) | SkillError::DuplicateSkill(_) => StatusCode::CONFLICT,
                SkillError::Parse(_) => StatusCode::BAD_REQUEST,
                SkillError::Memory(_) => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            }
        }
        match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Skill(e) => skill_status(e),
            ServiceError::Playing(PlayingError::Skill(e)) => skill_status(e),
            ServiceError::Playing(PlayingError::InvalidConfig(_)) => StatusCode::BAD_REQUEST,
            ServiceError::Playing(PlayingError::Memory(_)) => StatusCode::INTERNAL_SERVER_ERROR,
            ServiceError::Playing(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Diagnosis(DiagnosisError::Skill(e)) => skill_status(e),
            ServiceError::Diagnosis(DiagnosisError::ZeroBudget | DiagnosisError::InvalidConfig(_)) => {
                StatusCode::BAD_REQUEST
            }
            ServiceError::World(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Config(_)
            | ServiceError::Internal(_)
            | ServiceError::Io(_)
            | ServiceError::Memory(_)
            | ServiceError::Diagnosis(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.to_string() });
        if let Some(diagnostics) = self.diagnostics() {
            body["diagnostics"] = json!(diagnostics);
        }
        (self.status(), Json(body)).into_response()
    }
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/hardware", get(list_hardware))
        .route("/v1/behaviours", get(list_behaviours))
        .route("/v1/skills", get(list_skills).post(create_skill))
        .route("/v1/skills/{id}", get(get_skill))
        .route("/v1/skills/{id}/play", post(play_skill))
        .route("/v1/skills/{id}/ecm", get(skill_ecm))
        .route("/v1/skills/{id}/doa", get(skill_doa))
        .route("/v1/programs", post(create_program))
        .route("/v1/programs/{id}", get(get_program).put(update_program))
        .route("/v1/programs/{id}/run", post(run_program))
        .route("/v1/diagnosis", post(start_diagnosis))
        .route("/v1/diagnosis/{sid}/blame", get(diagnosis_blame))
        .route("/v1/executions", get(list_executions))
        .route("/v1/executions/{id}", get(get_execution))
        .route("/v1/executions/{id}/sensors", get(execution_sensors))
        .route("/v1/executions/{id}/profile", get(execution_profile))
        .route("/v1/sessions", get(list_sessions))
        .route("/v1/sessions/{sid}", get(get_session))
        .route("/v1/sessions/{sid}/events", get(session_events))
        .with_state(state)
}

#[derive(Debug, Serialize)]
struct HardwareView {
    #[serde(flatten)]
    spec: HardwareSpec,
    busy: bool,
}

async fn list_hardware(State(state): State<Shared>) -> ApiResult<Json<Vec<HardwareView>>> {
    let sim = &state.engine.sim;
    let views = sim
        .hardware
        .specs()
        .iter()
        .map(|spec| {
            let busy = sim.acquire_hardware(&spec.name)?.is_busy();
            Ok(HardwareView {
                spec: spec.clone(),
                busy,
            })
        })
        .collect::<ApiResult<_>>()?;
    Ok(Json(views))
}

async fn list_behaviours(State(state): State<Shared>) -> Json<Vec<BehaviourDescriptor>> {
    Json(
        state
            .engine
            .registry
            .behaviours()
            .iter()
            .map(|b| b.descriptor().clone())
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
struct HardwareQuery {
    hardware: Option<String>,
}

async fn list_skills(State(state): State<Shared>, Query(q): Query<HardwareQuery>) -> Json<Vec<Skill>> {
    let registry = &state.engine.registry;
    let skills = match q.hardware {
        Some(list) => {
            let config: BTreeSet<String> =
                list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
            state
                .engine
                .list_skills_for_hardware(&config)
                .iter()
                .filter_map(|id| registry.skill(id).ok())
                .map(|s| (*s).clone())
                .collect()
        }
        None => registry.skills().iter().map(|s| (**s).clone()).collect(),
    };
    Json(skills)
}

async fn get_skill(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Skill>> {
    Ok(Json((*state.engine.registry.skill(&id)?).clone()))
}

#[derive(Debug, Deserialize)]
struct CreateSkill {
    id: String,
    #[serde(default)]
    description: String,
    /// Registered program or primitive run as the basic behaviour; absent
    /// for the empty basic behaviour.
    #[serde(default)]
    program: Option<String>,
    predicate: String,
    required_hardware: BTreeSet<String>,
    #[serde(default)]
    scenario: Option<ScenarioId>,
    #[serde(default)]
    playing: Option<PlayingSpec>,
}

async fn create_skill(
    State(state): State<Shared>,
    Json(body): Json<CreateSkill>,
) -> ApiResult<(StatusCode, Json<Skill>)> {
    let mut skill = Skill::new(&body.id, body.program.as_deref(), &body.predicate, &[]).describe(&body.description);
    skill.required_hardware = body.required_hardware;
    skill.scenario = body.scenario;
    skill.playing = body.playing;
    let created = state.engine.create_skill(skill)?;
    Ok((StatusCode::CREATED, Json((*created).clone())))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct PlayRequest {
    episodes: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct SessionStarted {
    session: String,
    seed: u64,
}

async fn play_skill(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Option<Json<PlayRequest>>,
) -> ApiResult<(StatusCode, Json<SessionStarted>)> {
    let request = body.map(|Json(b)| b).unwrap_or_default();
    let skill = state.engine.registry.skill(&id)?;
    if skill.playing.is_none() || skill.scenario.is_none() {
        return Err(PlayingError::NotPlayable(id).into());
    }
    let config = PlayConfig {
        episodes: request.episodes.unwrap_or(state.config.playing.episodes),
        seed: request.seed.unwrap_or(state.config.playing.seed),
        ..state.config.playing.clone()
    };
    config.validate()?;
    let seed = config.seed;
    let sid = state.sessions.create(SessionKind::Playing, &id, seed);
    let session = sid.clone();
    tokio::task::spawn_blocking(move || {
        let hub = &state.sessions;
        hub.start(&sid).expect("fresh session starts");
        let result = state.play_skill(&id, &config, |event| {
            let path = json!({ "episode": event.episode, "path": event.path });
            let _ = hub.publish(&sid, EventKind::WalkPath, path);
            let _ = hub.publish(&sid, EventKind::EpisodeResult, json!(event));
        });
        let outcome = result
            .map(|report| {
                let sensing = &report.ecm.sensing[report.ecm.greedy_sensing()];
                let policy = report.ecm.greedy_policy(sensing);
                json!({
                    "skill": report.skill,
                    "episodes": report.curve.len(),
                    "success_rate": report.curve.running_mean(report.curve.len()),
                    "trailing_rate": report.curve.trailing_rate(config.promotion_window),
                    "promoted": report.promoted,
                    "greedy_policy": policy,
                })
            })
            .map_err(|e| e.to_string());
        let _ = hub.finish(&sid, outcome);
    });
    Ok((StatusCode::ACCEPTED, Json(SessionStarted { session, seed })))
}

async fn skill_ecm(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let skill = state.engine.registry.skill(&id)?;
    let ecm = skill
        .ecm
        .as_ref()
        .ok_or_else(|| ServiceError::NotFound(format!("trained ECM of {id:?}")))?;
    Ok(Json(json!(ecm.to_document())))
}

#[derive(Debug, Default, Deserialize)]
struct SeedQuery {
    seed: Option<u64>,
}

async fn skill_doa(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<SeedQuery>,
) -> ApiResult<Json<Value>> {
    let seed = q.seed.unwrap_or(0);
    let record = blocking(move || state.probe_doa(&id, seed)).await?;
    Ok(Json(json!({
        "skill": record.skill,
        "seed": seed,
        "successes": record.successes(),
        "probed": record.probed,
    })))
}

#[derive(Debug, Deserialize)]
struct CreateProgram {
    id: String,
    #[serde(default)]
    description: String,
    ast: Value,
}

#[derive(Debug, Serialize)]
struct ProgramView {
    id: String,
    description: String,
    ast: ProgramAst,
}

fn parse_ast(value: &Value) -> ApiResult<ProgramAst> {
    Ok(ProgramAst::from_json(&value.to_string())?)
}

fn program_view(state: &AppState, id: &str) -> ApiResult<ProgramView> {
    let ast = state.engine.program(id)?;
    let description = state.engine.registry.behaviour(id)?.descriptor().description.clone();
    Ok(ProgramView {
        id: id.to_string(),
        description,
        ast,
    })
}

async fn create_program(
    State(state): State<Shared>,
    Json(body): Json<CreateProgram>,
) -> ApiResult<(StatusCode, Json<ProgramView>)> {
    let ast = parse_ast(&body.ast)?;
    if state.engine.registry.behaviour(&body.id).is_ok() {
        return Err(SkillError::DuplicateBehaviour(body.id).into());
    }
    state.engine.register_program(&body.id, &body.description, ast)?;
    Ok((StatusCode::CREATED, Json(program_view(&state, &body.id)?)))
}

async fn get_program(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<ProgramView>> {
    Ok(Json(program_view(&state, &id)?))
}

#[derive(Debug, Deserialize)]
struct UpdateProgram {
    ast: Value,
}

async fn update_program(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<UpdateProgram>,
) -> ApiResult<Json<ProgramView>> {
    let ast = parse_ast(&body.ast)?;
    state.engine.update_program(&id, ast)?;
    Ok(Json(program_view(&state, &id)?))
}

#[derive(Debug, Deserialize)]
struct RunRequest {
    scenario: ScenarioId,
    #[serde(default)]
    seed: u64,
}

async fn run_program(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<RunRequest>,
) -> ApiResult<Json<Value>> {
    let ast = state.engine.program(&id)?;
    let sid = state.sessions.create(SessionKind::ProgramRun, &id, body.seed);
    let worker = state.clone();
    let session = sid.clone();
    blocking(move || {
        let hub = &worker.sessions;
        hub.start(&session)?;
        match worker.run_program(&id, &ast, body.scenario, body.seed) {
            Ok(exec) => {
                let summary = json!({
                    "record": RecordSummary::from(&exec.record),
                    "abort": exec.abort.as_ref().map(ToString::to_string),
                });
                hub.finish(&session, Ok(summary.clone()))?;
                Ok(json!({ "session": session, "seed": body.seed, "success": exec.success(), "execution": summary }))
            }
            Err(e) => {
                hub.finish(&session, Err(e.to_string()))?;
                Err(e)
            }
        }
    })
    .await
    .map(Json)
}

async fn start_diagnosis(
    State(state): State<Shared>,
    Json(request): Json<DiagnosisRequest>,
) -> ApiResult<(StatusCode, Json<SessionStarted>)> {
    if request.budget == 0 {
        return Err(DiagnosisError::ZeroBudget.into());
    }
    if let Some(inject) = &request.inject {
        let spec = inject.spec();
        if !state.engine.sim.functions.contains(&spec.function_id) {
            return Err(ServiceError::BadRequest(format!("unknown function {:?}", spec.function_id)));
        }
    }
    let subject = format!("{:?}", request.strategy).to_lowercase();
    let sid = state.sessions.create(SessionKind::Diagnosis, &subject, request.seed);
    let session = sid.clone();
    let seed = request.seed;
    tokio::task::spawn_blocking(move || {
        let hub = &state.sessions;
        hub.start(&sid).expect("fresh session starts");
        let result = state.run_diagnosis(&sid, &request, |snapshot| {
            let _ = hub.publish(&sid, EventKind::BlameSnapshot, json!(snapshot));
        });
        let _ = hub.finish(&sid, result.map(|o| json!(o)).map_err(|e| e.to_string()));
    });
    Ok((StatusCode::ACCEPTED, Json(SessionStarted { session, seed })))
}

async fn diagnosis_blame(State(state): State<Shared>, Path(sid): Path<String>) -> ApiResult<Json<Value>> {
    let session = state
        .sessions
        .get(&sid)
        .filter(|s| s.kind == SessionKind::Diagnosis)
        .ok_or_else(|| ServiceError::NotFound(format!("diagnosis session {sid:?}")))?;
    if let Some(result) = session.result {
        return Ok(Json(json!({
            "session": sid,
            "state": session.state,
            "argmax": result["argmax"],
            "probability": result["probability"],
            "blame": result["blame"],
            "tests": result["session"]["steps"].as_array().map_or(0, Vec::len),
        })));
    }
    let (events, _) = state.sessions.events_after(&sid, 0)?;
    let latest = events
        .iter()
        .rev()
        .find(|e| e.kind == EventKind::BlameSnapshot)
        .map(|e| serde_json::from_value::<BlameSnapshot>(e.payload.clone()))
        .transpose()
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
    Ok(Json(json!({
        "session": sid,
        "state": session.state,
        "argmax": latest.as_ref().map(|s| s.argmax.clone()),
        "probability": latest.as_ref().map(|s| s.probability),
        "blame": latest.map(|s| s.posterior),
        "tests": events.iter().filter(|e| e.kind == EventKind::BlameSnapshot).count(),
        "error": session.error,
    })))
}

#[derive(Debug, Deserialize)]
struct ExecutionQuery {
    subject: Option<String>,
    success: Option<bool>,
    limit: Option<usize>,
}

async fn list_executions(
    State(state): State<Shared>,
    Query(q): Query<ExecutionQuery>,
) -> ApiResult<Json<Vec<RecordSummary>>> {
    let filter = ExecutionFilter {
        subject: q.subject,
        success: q.success,
        limit: Some(q.limit.unwrap_or(100)),
    };
    let records = blocking(move || Ok(state.store().fetch_executions(&filter)?)).await?;
    Ok(Json(records.iter().map(RecordSummary::from).collect()))
}

fn fetch_record(state: &AppState, id: i64) -> ApiResult<skillforge::memory::ExecutionRecord> {
    state
        .store()
        .fetch_execution(id)?
        .ok_or_else(|| ServiceError::NotFound(format!("execution {id}")))
}

async fn get_execution(State(state): State<Shared>, Path(id): Path<i64>) -> ApiResult<Json<RecordSummary>> {
    Ok(Json(RecordSummary::from(&fetch_record(&state, id)?)))
}

async fn execution_sensors(State(state): State<Shared>, Path(id): Path<i64>) -> ApiResult<Json<Value>> {
    let sensor = fetch_record(&state, id)?.sensor;
    let rows: Vec<&[f64]> = (0..sensor.rows()).map(|r| sensor.row(r)).collect();
    Ok(Json(json!({
        "execution": id,
        "channels": sensor.channels(),
        "ticks": sensor.ticks(),
        "rows": rows,
    })))
}

async fn execution_profile(State(state): State<Shared>, Path(id): Path<i64>) -> ApiResult<Json<Value>> {
    let profile = fetch_record(&state, id)?.profile;
    let rows: Vec<&[u32]> = (0..profile.rows()).map(|r| profile.row(r)).collect();
    Ok(Json(json!({
        "execution": id,
        "functions": profile.functions(),
        "ticks": profile.ticks(),
        "rows": rows,
    })))
}

async fn list_sessions(State(state): State<Shared>) -> Json<Value> {
    Json(json!(state.sessions.list()))
}

async fn get_session(State(state): State<Shared>, Path(sid): Path<String>) -> ApiResult<Json<Value>> {
    let session = state
        .sessions
        .get(&sid)
        .ok_or_else(|| ServiceError::NotFound(format!("session {sid:?}")))?;
    Ok(Json(json!(session)))
}

#[derive(Debug, Default, Deserialize)]
struct CursorQuery {
    cursor: Option<u64>,
}

fn sse_event(envelope: &EventEnvelope) -> Event {
    Event::default()
        .id(envelope.sequence.to_string())
        .event(envelope.kind.as_str())
        .data(serde_json::to_string(envelope).expect("envelope serializes"))
}

/// Streams a session's events after the cursor given by the `Last-Event-ID`
/// header or the `cursor` query parameter, and ends after the terminal event.
async fn session_events(
    State(state): State<Shared>,
    Path(sid): Path<String>,
    Query(q): Query<CursorQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let after = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse().ok())
        .or(q.cursor)
        .unwrap_or(0);
    let receiver = state.sessions.subscribe(&sid)?;
    let batches = stream::unfold(
        (state, sid, after, receiver, false),
        |(state, sid, after, mut receiver, ended)| async move {
            if ended {
                return None;
            }
            loop {
                receiver.borrow_and_update();
                let (events, terminal) = state.sessions.events_after(&sid, after).ok()?;
                if let Some(last) = events.last() {
                    let next = last.sequence;
                    return Some((events, (state, sid, next, receiver, terminal)));
                }
                if terminal || receiver.changed().await.is_err() {
                    return None;
                }
            }
        },
    );
    let events = batches.flat_map(|batch| stream::iter(batch.iter().map(|e| Ok(sse_event(e))).collect::<Vec<_>>()));
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

/// Serves the API on the configured port until interrupted.
pub async fn serve(state: AppState) -> ApiResult<()> {
    let port = state.config.port;
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
