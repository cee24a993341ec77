use std::fs;
use std::io::{self, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use skyplan_core::mission::{parse_mission, parse_objective, serialize_mission, Mission};
use skyplan_core::moea::{Hooks, Progress, SearchConfig};
use skyplan_core::sim::{events_to_jsonl, SimSnapshot, SimState, DEFAULT_DT};

use crate::api::{self, App};
use crate::error::{Result, ServiceError};
use crate::planner::{self, load_grid, with_profile_overrides, Backend};
use crate::response::{decode_doc, PlanRequest, PlanResponse, RankOptions, SCHEMA_VERSION};
use crate::sim_io::{report, solution, split_plan_ref, start_sim};
use crate::store::{write_atomic, Store};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_NO_SOLUTION: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "skyplan", version, about = "Multi-UAV mission planning, ranking and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Check a mission document.
    Validate {
        #[arg(long)]
        mission: PathBuf,
        #[arg(long)]
        elevation: Option<PathBuf>,
    },
    /// Plan a mission and rank the solutions.
    Plan {
        #[arg(long)]
        mission: PathBuf,
        /// JSON object merged into the mission's operator profile.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Plan the rest of a running mission from a snapshot.
    Replan {
        #[arg(long)]
        snapshot: PathBuf,
        /// Plan being replaced, as `file#index`.
        #[arg(long)]
        plan: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Fly a plan in the simulator and print the event log.
    Simulate(SimArgs),
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value = "skyplan-data")]
        data: PathBuf,
        #[arg(long)]
        planner_cmd: Option<String>,
    },
    /// Answer one plan request: JSON on stdin, JSON on stdout.
    PlanStdio,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// EGRID terrain file; flat sea level when absent.
    #[arg(long)]
    elevation: Option<PathBuf>,
    /// Planner budget in seconds.
    #[arg(long)]
    runtime: Option<f64>,
    /// Random seed; drawn and echoed when absent.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    population: Option<usize>,
    /// Stop after this many generations even if time is left.
    #[arg(long)]
    generations: Option<usize>,
    /// External planner speaking the plan-stdio protocol.
    #[arg(long)]
    planner_cmd: Option<String>,
    /// VIKOR group-utility weight.
    #[arg(long)]
    vikor_v: Option<f64>,
    /// Genome distance under which lower ranked solutions are dropped.
    #[arg(long)]
    similarity: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    mission: PathBuf,
    /// Plan to fly, as `file#index`.
    #[arg(long)]
    plan: String,
    #[arg(long)]
    elevation: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DT)]
    tick: f64,
    /// Run as fast as possible instead of in real time.
    #[arg(long)]
    headless: bool,
    /// Simulated seconds per wall-clock second when not headless.
    #[arg(long, default_value_t = 1.0)]
    pace: f64,
    /// Stop (or inject, snapshot, apply) at this mission time.
    #[arg(long)]
    until: Option<f64>,
    /// Objective documents injected at `--until`.
    #[arg(long)]
    inject: Vec<PathBuf>,
    /// Write the state `--delta` seconds after `--until` here.
    #[arg(long)]
    snapshot_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Replacement plan (`file#index`) made from `--snapshot`.
    #[arg(long, requires = "snapshot")]
    apply: Option<String>,
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Event log destination; stdout when absent.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Final state summary.
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let serving = matches!(cli.cmd, Cmd::Serve { .. });
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(if serving { "info" } else { "warn" }));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(io::stderr).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = writeln!(io::stderr(), "{}", serde_json::to_string(&e.problem()).expect("plain data"));
            ExitCode::from(if e.is_validation() { EXIT_INVALID } else { EXIT_FAILURE })
        }
    }
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Validate { mission, elevation } => validate(&mission, elevation.as_deref()),
        Cmd::Plan { mission, profile, search } => plan(&mission, profile.as_deref(), &search),
        Cmd::Replan { snapshot, plan, search } => replan(&snapshot, &plan, &search),
        Cmd::Simulate(a) => simulate(&a),
        Cmd::Serve { port, bind, data, planner_cmd } => serve(&bind, port, &data, planner_cmd),
        Cmd::PlanStdio => plan_stdio(),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))
}

fn read_mission(path: &Path) -> Result<Mission> {
    Ok(parse_mission(&read(path)?)?)
}

fn read_plan(path: &Path) -> Result<PlanResponse> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| ServiceError::io(path, io::Error::new(io::ErrorKind::InvalidData, e)))
}

fn emit<T: Serialize>(v: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).expect("plain data");
    text.push('\n');
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| ServiceError::io("<stdout>", e)),
    }
}

fn validate(mission: &Path, elevation: Option<&Path>) -> Result<u8> {
    let m = read_mission(mission)?;
    let egrid = elevation.map(read).transpose()?;
    load_grid(&m, egrid.as_deref())?;
    let tasks = m.tasks()?;
    emit(
        &json!({
            "valid": true,
            "name": m.name,
            "uavs": m.uavs.len(),
            "gcss": m.gcss.len(),
            "objectives": m.objectives.len(),
            "tasks": tasks.tasks.len(),
        }),
        None,
    )?;
    Ok(EXIT_OK)
}

impl SearchArgs {
    fn config(&self, mut cfg: SearchConfig) -> SearchConfig {
        if let Some(p) = self.population {
            cfg.population = p;
        }
        cfg.max_generations = self.generations;
        cfg
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0)
    }

    fn rank(&self) -> RankOptions {
        let d = RankOptions::default();
        RankOptions {
            v: self.vikor_v.unwrap_or(d.v),
            similarity_threshold: self.similarity.unwrap_or(d.similarity_threshold),
        }
    }

    fn elevation(&self) -> Result<Option<String>> {
        self.elevation.as_deref().map(read).transpose()
    }

    /// Runs the request and writes the response; exit 3 when empty.
    fn execute(&self, req: PlanRequest) -> Result<u8> {
        let backend = Backend::from_cmd(self.planner_cmd.clone());
        let log = |p: &Progress| {
            tracing::debug!(generation = p.generation, feasible = p.feasible, front = p.front, "{:.1}s", p.elapsed_s)
        };
        let hooks = Hooks { progress: Some(&log), cancel: None };
        let resp = planner::run(&req, &backend, hooks)?;
        if self.out.is_some() || !resp.solutions.is_empty() {
            emit(&resp, self.out.as_deref())?;
        }
        if resp.solutions.is_empty() {
            emit(&json!({ "solutions": 0, "seed": resp.seed, "histogram": resp.histogram }), None)?;
            return Ok(EXIT_NO_SOLUTION);
        }
        Ok(EXIT_OK)
    }
}

fn plan(mission: &Path, profile: Option<&Path>, a: &SearchArgs) -> Result<u8> {
    let mut m = read_mission(mission)?;
    if let Some(p) = profile {
        let patch: Value =
            serde_json::from_str(&read(p)?).map_err(|e| ServiceError::BadRequest(format!("{}: {e}", p.display())))?;
        m = with_profile_overrides(&m, &patch)?;
    }
    let egrid = a.elevation()?;
    // surface terrain problems before any planner starts
    load_grid(&m, egrid.as_deref())?;
    let cfg = a.config(SearchConfig::plan(a.runtime.unwrap_or(60.0), a.seed()));
    cfg.validate()?;
    a.execute(PlanRequest {
        schema_version: SCHEMA_VERSION,
        mission: serde_json::from_str(&serialize_mission(&m)).expect("serializer emits JSON"),
        elevation: egrid,
        config: cfg,
        rank: a.rank(),
        previous: None,
        snapshot: None,
    })
}

fn replan(snapshot: &Path, plan_ref: &str, a: &SearchArgs) -> Result<u8> {
    let snap: SimSnapshot = serde_json::from_str(&read(snapshot)?)
        .map_err(|e| ServiceError::BadRequest(format!("{}: {e}", snapshot.display())))?;
    let (path, idx) = split_plan_ref(plan_ref)?;
    let prev = read_plan(Path::new(path))?;
    let previous = solution(&prev, idx)?.genome.clone();
    let cfg = a.config(SearchConfig::replan(a.runtime.unwrap_or(120.0), a.seed()));
    cfg.validate()?;
    a.execute(PlanRequest {
        schema_version: SCHEMA_VERSION,
        mission: Value::Null,
        elevation: a.elevation()?,
        config: cfg,
        rank: a.rank(),
        previous: Some(previous),
        snapshot: Some(snap),
    })
}

/// Writes events as they are produced.
struct EventSink {
    out: Box<dyn Write>,
    written: usize,
}

impl EventSink {
    fn open(path: Option<&Path>) -> Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(io::BufWriter::new(fs::File::create(p).map_err(|e| ServiceError::io(p, e))?)),
            None => Box::new(io::stdout().lock()),
        };
        Ok(Self { out, written: 0 })
    }

    fn flush(&mut self, sim: &SimState) -> Result<()> {
        let text = events_to_jsonl(&sim.events[self.written..]);
        self.written = sim.events.len();
        self.out.write_all(text.as_bytes()).and_then(|_| self.out.flush()).map_err(|e| ServiceError::io("<events>", e))
    }
}

fn simulate(a: &SimArgs) -> Result<u8> {
    if !(a.tick > 0.0 && a.tick.is_finite()) {
        return Err(ServiceError::BadRequest(format!("--tick must be positive, got {}", a.tick)));
    }
    if !a.headless && !(a.pace > 0.0 && a.pace.is_finite()) {
        return Err(ServiceError::BadRequest(format!("--pace must be positive, got {}", a.pace)));
    }
    let m = read_mission(&a.mission)?;
    let egrid = a.elevation.as_deref().map(read).transpose()?;
    let grid = load_grid(&m, egrid.as_deref())?;
    let (path, idx) = split_plan_ref(&a.plan)?;
    let resp = read_plan(Path::new(path))?;
    let mut sim = start_sim(&m, grid.clone(), solution(&resp, idx)?)?;
    let mut sink = EventSink::open(a.events.as_deref())?;
    let step = |sim: &mut SimState, sink: &mut EventSink, until: Option<f64>| -> Result<()> {
        let done = |s: &SimState| until.map_or(s.is_finished(), |t| s.clock >= t);
        let t0 = Instant::now();
        let c0 = sim.clock;
        while !done(sim) {
            let dt = until.map_or(a.tick, |t| a.tick.min(t - sim.clock));
            if !a.headless {
                let due = Duration::from_secs_f64((sim.clock + dt - c0) / a.pace);
                std::thread::sleep(due.saturating_sub(t0.elapsed()));
            }
            if dt <= 1e-12 {
                break;
            }
            sim.tick(dt)?;
            sink.flush(sim)?;
        }
        Ok(())
    };

    step(&mut sim, &mut sink, a.until)?;
    for p in &a.inject {
        let o = parse_objective(&read(p)?, &sim.mission)?;
        sim.inject_objective(o)?;
    }
    sink.flush(&sim)?;
    if let Some(out) = &a.snapshot_out {
        emit(&sim.snapshot_at(a.delta)?, Some(out))?;
    }
    if let Some(plan_ref) = &a.apply {
        let snap_path = a.snapshot.as_deref().expect("clap requires --snapshot");
        let snap: SimSnapshot = serde_json::from_str(&read(snap_path)?)
            .map_err(|e| ServiceError::BadRequest(format!("{}: {e}", snap_path.display())))?;
        let (path, idx) = split_plan_ref(plan_ref)?;
        let new = read_plan(Path::new(path))?;
        let ctx = snap.plan_context(grid)?;
        let sched = decode_doc(&ctx, &solution(&new, idx)?.genome)?;
        sim.apply_replacement(&snap, &sched)?;
        sink.flush(&sim)?;
    }
    if a.until.is_some() && a.apply.is_some() {
        step(&mut sim, &mut sink, None)?;
    }
    if let Some(p) = &a.report {
        emit(&report(&sim), Some(p))?;
    }
    Ok(EXIT_OK)
}

fn serve(bind: &str, port: u16, data: &Path, planner_cmd: Option<String>) -> Result<u8> {
    let addr: SocketAddr = format!("{bind}:{port}")
        .parse()
        .map_err(|e| ServiceError::BadRequest(format!("address {bind}:{port}: {e}")))?;
    let app = App::new(Store::open(data)?, Backend::from_cmd(planner_cmd));
    let rt = tokio::runtime::Runtime::new().map_err(|e| ServiceError::io("<runtime>", e))?;
    rt.block_on(api::serve(addr, app)).map_err(|e| ServiceError::io(addr.to_string(), io::Error::other(e)))?;
    Ok(EXIT_OK)
}

fn plan_stdio() -> Result<u8> {
    let mut input = String::new();
    io::stdin().read_to_string(&mut input).map_err(|e| ServiceError::io("<stdin>", e))?;
    let req: PlanRequest =
        serde_json::from_str(&input).map_err(|e| ServiceError::BadRequest(format!("plan request: {e}")))?;
    let resp = planner::run_local(&req, Hooks::default())?;
    let text = serde_json::to_string(&resp).expect("plain data");
    io::stdout().write_all(text.as_bytes()).map_err(|e| ServiceError::io("<stdout>", e))?;
    Ok(EXIT_OK)
}
