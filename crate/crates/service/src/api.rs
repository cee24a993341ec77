//! HTTP+JSON API.

use std::collections::{HashMap, HashSet};
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use skyplan_core::geo::ElevationGrid;
use skyplan_core::mission::{parse_mission, parse_objective, serialize_mission};
use skyplan_core::moea::{Hooks, Mode, Progress, SearchConfig};
use skyplan_core::plan::GenomeDoc;
use skyplan_core::sim::{SimSnapshot, SimState, DEFAULT_DT};
use tokio::sync::watch;

use crate::error::{Result, ServiceError};
use crate::planner::{self, load_grid, with_profile_overrides, Backend};
use crate::response::{decode_doc, PlanRequest, RankOptions, SCHEMA_VERSION};
use crate::sim_io::{report, solution, start_sim, SimReport};
use crate::store::{AppliedPlan, SessionRecord, Store};

/// Wall-clock period of the session driver.
const DRIVER_PERIOD: Duration = Duration::from_millis(100);

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let p = self.problem();
        let status = StatusCode::from_u16(p.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut r = (status, Json(p)).into_response();
        r.headers_mut().insert(header::CONTENT_TYPE, "application/problem+json".parse().expect("static"));
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Canceled,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JobStatus {
    pub job_id: String,
    pub mission_id: String,
    pub run_id: String,
    pub mode: Mode,
    pub state: JobState,
    pub progress: Option<Progress>,
    pub solutions: Option<usize>,
    pub error: Option<crate::error::Problem>,
    pub snapshot_time: Option<f64>,
}

struct Job {
    cancel: AtomicBool,
    status: Mutex<JobStatus>,
}

impl Job {
    /// States only move forward.
    fn advance(&self, state: JobState) {
        let mut s = self.status.lock().unwrap();
        if state > s.state {
            s.state = state;
        }
    }

    fn status(&self) -> JobStatus {
        self.status.lock().unwrap().clone()
    }
}

struct Live {
    sim: SimState,
    grid: Arc<ElevationGrid>,
    /// Simulated seconds per wall-clock second; 0 pauses.
    pace: f64,
    dt: f64,
    /// Snapshots handed to replan runs, by run id.
    snapshots: HashMap<String, SimSnapshot>,
    record: SessionRecord,
    persisted: usize,
}

struct Session {
    live: Mutex<Live>,
    /// Number of events in the log.
    notify: watch::Sender<usize>,
}

pub struct App {
    store: Store,
    backend: Backend,
    jobs: Mutex<HashMap<String, Arc<Job>>>,
    busy: Mutex<HashSet<String>>,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
}

impl App {
    pub fn new(store: Store, backend: Backend) -> Arc<Self> {
        Arc::new(Self { store, backend, jobs: Mutex::default(), busy: Mutex::default(), sessions: Mutex::default() })
    }

    fn job(&self, id: &str) -> Result<Arc<Job>> {
        self.jobs.lock().unwrap().get(id).cloned().ok_or_else(|| ServiceError::NotFound(format!("job {id}")))
    }

    fn session(&self, id: &str) -> Result<Arc<Session>> {
        self.sessions.lock().unwrap().get(id).cloned().ok_or_else(|| ServiceError::NotFound(format!("session {id}")))
    }

    /// Queues a planner run; one per mission at a time.
    fn start_job(self: &Arc<Self>, mission_id: &str, req: PlanRequest, config: Value) -> Result<JobStatus> {
        if !self.busy.lock().unwrap().insert(mission_id.to_string()) {
            return Err(ServiceError::Conflict(format!("a planner job is already running for mission {mission_id}")));
        }
        let run_id = match self.store.new_run(mission_id, &config) {
            Ok(r) => r,
            Err(e) => {
                self.busy.lock().unwrap().remove(mission_id);
                return Err(e);
            }
        };
        let job_id = uuid::Uuid::new_v4().simple().to_string();
        let job = Arc::new(Job {
            cancel: AtomicBool::new(false),
            status: Mutex::new(JobStatus {
                job_id: job_id.clone(),
                mission_id: mission_id.to_string(),
                run_id: run_id.clone(),
                mode: req.config.mode,
                state: JobState::Queued,
                progress: None,
                solutions: None,
                error: None,
                snapshot_time: req.snapshot.as_ref().map(|s| s.snapshot_time),
            }),
        });
        self.jobs.lock().unwrap().insert(job_id, job.clone());
        let status = job.status();
        let app = self.clone();
        let mission_id = mission_id.to_string();
        tokio::task::spawn_blocking(move || {
            job.advance(JobState::Running);
            let cb = |p: &Progress| job.status.lock().unwrap().progress = Some(*p);
            let hooks = Hooks { progress: Some(&cb), cancel: Some(&job.cancel) };
            let out = planner::run(&req, &app.backend, hooks)
                .and_then(|resp| app.store.put_result(&mission_id, &run_id, &resp).map(|_| resp));
            match out {
                Ok(resp) => {
                    job.status.lock().unwrap().solutions = Some(resp.solutions.len());
                    job.advance(if resp.canceled { JobState::Canceled } else { JobState::Done });
                }
                Err(_) if job.cancel.load(Ordering::Relaxed) => job.advance(JobState::Canceled),
                Err(e) => {
                    tracing::warn!(run = %run_id, "planner job failed: {e}");
                    job.status.lock().unwrap().error = Some(e.problem());
                    job.advance(JobState::Failed);
                }
            }
            app.busy.lock().unwrap().remove(&mission_id);
        });
        Ok(status)
    }
}

/// Appends new events to the session log and wakes telemetry readers.
fn commit(app: &App, s: &Session, live: &mut Live) -> Result<()> {
    let n = live.sim.events.len();
    if n > live.persisted {
        let r = &live.record;
        app.store.append_events(&r.mission_id, &r.session_id, &live.sim.events[live.persisted..])?;
        live.persisted = n;
        s.notify.send_replace(n);
    }
    Ok(())
}

fn body<T: DeserializeOwned>(b: &Bytes) -> Result<T> {
    serde_json::from_slice(b).map_err(|e| ServiceError::BadRequest(format!("request body: {e}")))
}

fn text(b: &Bytes) -> Result<&str> {
    std::str::from_utf8(b).map_err(|_| ServiceError::BadRequest("body is not UTF-8".into()))
}

fn random_seed() -> u64 {
    uuid::Uuid::new_v4().as_u64_pair().0
}

type AppState = State<Arc<App>>;

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/missions", post(create_mission).get(list_missions))
        .route("/missions/{id}", get(get_mission).put(put_mission))
        .route("/missions/{id}/elevation", put(put_elevation))
        .route("/missions/{id}/plan", post(plan))
        .route("/missions/{id}/plans", get(list_plans))
        .route("/missions/{id}/plans/{run}", get(get_plan))
        .route("/jobs/{id}", get(get_job).delete(cancel_job))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/pace", post(set_pace))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/telemetry", get(telemetry))
        .route("/sessions/{id}/objectives", post(inject))
        .route("/sessions/{id}/replan", post(replan))
        .route("/sessions/{id}/apply", post(apply))
        .fallback(|| async { ServiceError::NotFound("route".into()) })
        .with_state(app)
}

pub async fn serve(addr: SocketAddr, app: Arc<App>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app)).await?;
    Ok(())
}

fn mission_summary(id: &str, m: &skyplan_core::mission::Mission) -> Result<Value> {
    Ok(json!({
        "id": id,
        "name": m.name,
        "uavs": m.uavs.len(),
        "objectives": m.objectives.len(),
        "tasks": m.tasks()?.tasks.len(),
    }))
}

async fn create_mission(State(app): AppState, b: Bytes) -> Result<impl IntoResponse> {
    let m = parse_mission(text(&b)?)?;
    let id = uuid::Uuid::new_v4().simple().to_string()[..12].to_string();
    app.store.put_mission(&id, &m)?;
    Ok((StatusCode::CREATED, Json(mission_summary(&id, &m)?)))
}

async fn list_missions(State(app): AppState) -> Result<Json<Value>> {
    Ok(Json(json!({ "missions": app.store.list_missions()? })))
}

async fn get_mission(State(app): AppState, Path(id): Path<String>) -> Result<Response> {
    let m = app.store.get_mission(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], serialize_mission(&m)).into_response())
}

async fn put_mission(State(app): AppState, Path(id): Path<String>, b: Bytes) -> Result<Json<Value>> {
    let m = parse_mission(text(&b)?)?;
    app.store.put_mission(&id, &m)?;
    Ok(Json(mission_summary(&id, &m)?))
}

async fn put_elevation(State(app): AppState, Path(id): Path<String>, b: Bytes) -> Result<StatusCode> {
    let t = text(&b)?;
    t.parse::<ElevationGrid>()?;
    app.store.put_elevation(&id, t)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PlanBody {
    runtime: f64,
    seed: Option<u64>,
    profile_overrides: Option<Value>,
    population: Option<usize>,
    max_generations: Option<usize>,
    #[serde(default)]
    rank: RankOptions,
}

impl PlanBody {
    fn config(&self, mode: Mode) -> (SearchConfig, u64) {
        let seed = self.seed.unwrap_or_else(random_seed);
        let mut cfg = match mode {
            Mode::Plan => SearchConfig::plan(self.runtime, seed),
            Mode::Replan => SearchConfig::replan(self.runtime, seed),
        };
        if let Some(p) = self.population {
            cfg.population = p;
        }
        cfg.max_generations = self.max_generations;
        (cfg, seed)
    }
}

async fn plan(State(app): AppState, Path(id): Path<String>, b: Bytes) -> Result<impl IntoResponse> {
    let pb: PlanBody = body(&b)?;
    let mut m = app.store.get_mission(&id)?;
    if let Some(p) = &pb.profile_overrides {
        m = with_profile_overrides(&m, p)?;
    }
    let (cfg, seed) = pb.config(Mode::Plan);
    cfg.validate()?;
    let wire: Value = serde_json::from_str(&serialize_mission(&m)).expect("serializer emits JSON");
    let config = json!({
        "schemaVersion": SCHEMA_VERSION,
        "mode": "plan",
        "runtimeS": pb.runtime,
        "seed": seed,
        "profileOverrides": pb.profile_overrides,
        "search": cfg,
        "rank": pb.rank,
        "mission": wire,
    });
    let req = PlanRequest {
        schema_version: SCHEMA_VERSION,
        mission: wire,
        elevation: app.store.get_elevation(&id)?,
        config: cfg,
        rank: pb.rank,
        previous: None,
        snapshot: None,
    };
    let st = app.start_job(&id, req, config)?;
    Ok((StatusCode::ACCEPTED, Json(st)))
}

async fn list_plans(State(app): AppState, Path(id): Path<String>) -> Result<Json<Value>> {
    Ok(Json(json!({ "runs": app.store.list_runs(&id)? })))
}

async fn get_plan(State(app): AppState, Path((id, run)): Path<(String, String)>) -> Result<Response> {
    match app.store.get_result(&id, &run) {
        Ok(r) => Ok(Json(r).into_response()),
        Err(ServiceError::NotFound(_)) if app.store.get_run_config(&id, &run).is_ok() => {
            Err(ServiceError::Conflict(format!("run {run} has no result yet")))
        }
        Err(e) => Err(e),
    }
}

async fn get_job(State(app): AppState, Path(id): Path<String>) -> Result<Json<JobStatus>> {
    Ok(Json(app.job(&id)?.status()))
}

async fn cancel_job(State(app): AppState, Path(id): Path<String>) -> Result<impl IntoResponse> {
    let job = app.job(&id)?;
    job.cancel.store(true, Ordering::Relaxed);
    Ok((StatusCode::ACCEPTED, Json(job.status())))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SessionBody {
    mission_id: String,
    run_id: String,
    solution_index: usize,
    pace: Option<f64>,
    tick: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct SessionDoc {
    session_id: String,
    pace: f64,
    tick: f64,
    record: SessionRecord,
    state: SimReport,
}

fn session_doc(live: &Live) -> SessionDoc {
    SessionDoc {
        session_id: live.record.session_id.clone(),
        pace: live.pace,
        tick: live.dt,
        record: live.record.clone(),
        state: report(&live.sim),
    }
}

fn check_pace(p: f64) -> Result<f64> {
    if p >= 0.0 && p.is_finite() {
        Ok(p)
    } else {
        Err(ServiceError::BadRequest(format!("pace must be a finite number >= 0, got {p}")))
    }
}

async fn create_session(State(app): AppState, b: Bytes) -> Result<impl IntoResponse> {
    let sb: SessionBody = body(&b)?;
    let pace = check_pace(sb.pace.unwrap_or(1.0))?;
    let dt = sb.tick.unwrap_or(DEFAULT_DT);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ServiceError::BadRequest(format!("tick must be positive, got {dt}")));
    }
    let cfg = app.store.get_run_config(&sb.mission_id, &sb.run_id)?;
    if cfg["mode"] != "plan" {
        return Err(ServiceError::BadRequest(format!("run {} is not a plan run", sb.run_id)));
    }
    // the mission as it was planned, overrides included
    let m = parse_mission(&cfg["mission"].to_string())?;
    let resp = app.store.get_result(&sb.mission_id, &sb.run_id)?;
    let sol = solution(&resp, sb.solution_index)?;
    let grid = load_grid(&m, app.store.get_elevation(&sb.mission_id)?.as_deref())?;
    let sim = start_sim(&m, grid.clone(), sol)?;
    let record = SessionRecord {
        session_id: uuid::Uuid::new_v4().simple().to_string()[..12].to_string(),
        mission_id: sb.mission_id,
        run_id: sb.run_id,
        solution_index: sb.solution_index,
        replans: Vec::new(),
        applied: Vec::new(),
    };
    app.store.put_session(&record)?;
    let (notify, _) = watch::channel(0);
    let live = Live { sim, grid, pace, dt, snapshots: HashMap::new(), record: record.clone(), persisted: 0 };
    let doc = session_doc(&live);
    let s = Arc::new(Session { live: Mutex::new(live), notify });
    app.sessions.lock().unwrap().insert(record.session_id, s.clone());
    tokio::spawn(drive(Arc::downgrade(&app), Arc::downgrade(&s)));
    Ok((StatusCode::CREATED, Json(doc)))
}

/// Advances a session in real time at its pace until it is dropped.
async fn drive(app: Weak<App>, s: Weak<Session>) {
    let mut iv = tokio::time::interval(DRIVER_PERIOD);
    iv.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        iv.tick().await;
        let (Some(app), Some(s)) = (app.upgrade(), s.upgrade()) else { return };
        let mut live = s.live.lock().unwrap();
        if live.pace == 0.0 || live.sim.is_finished() {
            continue;
        }
        let target = live.sim.clock + live.pace * DRIVER_PERIOD.as_secs_f64();
        let dt = live.dt;
        let step = live.sim.advance_to(target, dt);
        let saved = commit(&app, &s, &mut live);
        if let Err(e) = step.map_err(ServiceError::from).and(saved) {
            tracing::error!(session = %live.record.session_id, "driver stopped: {e}");
            live.pace = 0.0;
        }
    }
}

async fn get_session(State(app): AppState, Path(id): Path<String>) -> Result<Json<SessionDoc>> {
    let s = app.session(&id)?;
    let live = s.live.lock().unwrap();
    Ok(Json(session_doc(&live)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PaceBody {
    pace: f64,
}

async fn set_pace(State(app): AppState, Path(id): Path<String>, b: Bytes) -> Result<Json<SessionDoc>> {
    let pb: PaceBody = body(&b)?;
    let s = app.session(&id)?;
    let mut live = s.live.lock().unwrap();
    live.pace = check_pace(pb.pace)?;
    Ok(Json(session_doc(&live)))
}

/// Steps a session by hand, e.g. while paused.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdvanceBody {
    to: Option<f64>,
    by: Option<f64>,
    #[serde(default)]
    end: bool,
}

async fn advance(State(app): AppState, Path(id): Path<String>, b: Bytes) -> Result<Json<SessionDoc>> {
    let ab: AdvanceBody = body(&b)?;
    let s = app.session(&id)?;
    let mut live = s.live.lock().unwrap();
    let dt = live.dt;
    match (ab.to, ab.by, ab.end) {
        (Some(t), None, false) => live.sim.advance_to(t, dt)?,
        (None, Some(d), false) => {
            let t = live.sim.clock + d;
            live.sim.advance_to(t, dt)?
        }
        (None, None, true) => live.sim.run_to_end(dt)?,
        _ => return Err(ServiceError::BadRequest("give exactly one of `to`, `by`, `end`".into())),
    }
    commit(&app, &s, &mut live)?;
    Ok(Json(session_doc(&live)))
}

async fn telemetry(State(app): AppState, Path(id): Path<String>) -> Result<Response> {
    let s = app.session(&id)?;
    let rx = s.notify.subscribe();
    // backlog first, then whatever gets appended, until the mission is over
    let stream = futures::stream::unfold((s, rx, 0usize), |(s, mut rx, next)| async move {
        loop {
            let (chunk, n, finished) = {
                let live = s.live.lock().unwrap();
                let n = live.persisted;
                let chunk = skyplan_core::sim::events_to_jsonl(&live.sim.events[next..n]);
                (chunk, n, live.sim.is_finished())
            };
            if !chunk.is_empty() {
                return Some((Ok::<_, Infallible>(Bytes::from(chunk)), (s, rx, n)));
            }
            if finished || rx.changed().await.is_err() {
                return None;
            }
        }
    });
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(stream)).into_response())
}

async fn inject(State(app): AppState, Path(id): Path<String>, b: Bytes) -> Result<impl IntoResponse> {
    let s = app.session(&id)?;
    let mut live = s.live.lock().unwrap();
    let o = parse_objective(text(&b)?, &live.sim.mission)?;
    live.sim.inject_objective(o)?;
    commit(&app, &s, &mut live)?;
    Ok((StatusCode::CREATED, Json(session_doc(&live))))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ReplanBody {
    runtime: f64,
    seed: Option<u64>,
    population: Option<usize>,
    max_generations: Option<usize>,
    #[serde(default)]
    rank: RankOptions,
}

async fn replan(State(app): AppState, Path(id): Path<String>, b: Bytes) -> Result<impl IntoResponse> {
    let rb: ReplanBody = body(&b)?;
    let pb = PlanBody {
        runtime: rb.runtime,
        seed: rb.seed,
        profile_overrides: None,
        population: rb.population,
        max_generations: rb.max_generations,
        rank: rb.rank,
    };
    let (cfg, seed) = pb.config(Mode::Replan);
    cfg.validate()?;
    let s = app.session(&id)?;
    let (req, config, mission_id) = {
        let live = s.live.lock().unwrap();
        // the plan must be ready when the clock gets there
        let snap = live.sim.snapshot_at(rb.runtime)?;
        let previous = current_genome(&app, &live.record)?;
        let mission_id = live.record.mission_id.clone();
        let config = json!({
            "schemaVersion": SCHEMA_VERSION,
            "mode": "replan",
            "sessionId": live.record.session_id,
            "runtimeS": rb.runtime,
            "seed": seed,
            "takenAt": snap.taken_at,
            "snapshotTime": snap.snapshot_time,
            "search": cfg,
            "rank": rb.rank,
        });
        let req = PlanRequest {
            schema_version: SCHEMA_VERSION,
            mission: Value::Null,
            elevation: app.store.get_elevation(&mission_id)?,
            config: cfg,
            rank: rb.rank,
            previous: Some(previous),
            snapshot: Some(snap),
        };
        (req, config, mission_id)
    };
    let snap = req.snapshot.clone().expect("set above");
    let st = app.start_job(&mission_id, req, config)?;
    let mut live = s.live.lock().unwrap();
    live.snapshots.insert(st.run_id.clone(), snap);
    live.record.replans.push(st.run_id.clone());
    app.store.put_session(&live.record)?;
    Ok((StatusCode::ACCEPTED, Json(st)))
}

/// Genome of the plan the session is flying now.
fn current_genome(app: &App, r: &SessionRecord) -> Result<GenomeDoc> {
    let (run, idx) = match r.applied.last() {
        Some(a) => (&a.run_id, a.solution_index),
        None => (&r.run_id, r.solution_index),
    };
    let resp = app.store.get_result(&r.mission_id, run)?;
    Ok(solution(&resp, idx)?.genome.clone())
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ApplyBody {
    run_id: Option<String>,
    solution_index: usize,
}

async fn apply(State(app): AppState, Path(id): Path<String>, b: Bytes) -> Result<Json<SessionDoc>> {
    let ab: ApplyBody = body(&b)?;
    let s = app.session(&id)?;
    let mut live = s.live.lock().unwrap();
    let run = match ab.run_id.or_else(|| live.record.replans.last().cloned()) {
        Some(r) => r,
        None => return Err(ServiceError::BadRequest("session has no replan run".into())),
    };
    let snap = live
        .snapshots
        .get(&run)
        .cloned()
        .ok_or_else(|| ServiceError::NotFound(format!("replan run {run} of session {id}")))?;
    let resp = app.store.get_result(&live.record.mission_id, &run)?;
    let sol = solution(&resp, ab.solution_index)?;
    let ctx = snap.plan_context(live.grid.clone())?;
    let sched = decode_doc(&ctx, &sol.genome)?;
    live.sim.apply_replacement(&snap, &sched)?;
    let clock = live.sim.clock;
    live.record.applied.push(AppliedPlan { run_id: run, solution_index: ab.solution_index, clock });
    app.store.put_session(&live.record)?;
    commit(&app, &s, &mut live)?;
    Ok(Json(session_doc(&live)))
}
