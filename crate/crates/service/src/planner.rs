//! Runs a [`PlanRequest`] either here or in an external process that
//! speaks the same JSON over stdin/stdout.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde_json::Value;
use skyplan_core::geo::ElevationGrid;
use skyplan_core::mission::{parse_mission, serialize_mission, Mission};
use skyplan_core::moea::{self, Hooks, Mode};
use skyplan_core::plan::PlanContext;

use crate::error::{Problem, Result, ServiceError};
use crate::response::{build_response, PlanRequest, PlanResponse};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Backend {
    #[default]
    InProcess,
    /// Shell command line of an external planner.
    Command(String),
}

impl Backend {
    pub fn from_cmd(cmd: Option<String>) -> Self {
        cmd.map_or(Backend::InProcess, Backend::Command)
    }
}

/// Terrain for `m`: parsed EGRID text, or flat sea level over its bounds.
pub fn load_grid(m: &Mission, egrid: Option<&str>) -> Result<Arc<ElevationGrid>> {
    let g = match egrid {
        Some(text) => text.parse::<ElevationGrid>()?,
        None => ElevationGrid::flat(m.bounds, m.arc_seconds, 0.0)?,
    };
    Ok(Arc::new(g))
}

/// Applies a JSON merge patch to the mission's operator profile and
/// re-validates the result.
pub fn with_profile_overrides(m: &Mission, patch: &Value) -> Result<Mission> {
    if !patch.is_object() {
        return Err(ServiceError::BadRequest("profile overrides must be a JSON object".into()));
    }
    let mut doc: Value = serde_json::from_str(&serialize_mission(m)).expect("serializer emits JSON");
    merge(&mut doc["operatorProfile"], patch);
    Ok(parse_mission(&doc.to_string())?)
}

fn merge(target: &mut Value, patch: &Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                if v.is_null() {
                    t.remove(k);
                } else {
                    merge(t.entry(k.clone()).or_insert(Value::Null), v);
                }
            }
        }
        (t, p) => *t = p.clone(),
    }
}

/// Context the request plans in, plus the snapshot time when replanning.
pub fn request_context(req: &PlanRequest) -> Result<(PlanContext, Option<f64>)> {
    if let Some(snap) = &req.snapshot {
        let grid = load_grid(&snap.mission, req.elevation.as_deref())?;
        return Ok((snap.plan_context(grid)?, Some(snap.snapshot_time)));
    }
    let m = parse_mission(&req.mission.to_string())?;
    let grid = load_grid(&m, req.elevation.as_deref())?;
    Ok((PlanContext::new(m, grid)?, None))
}

pub fn run(req: &PlanRequest, backend: &Backend, hooks: Hooks) -> Result<PlanResponse> {
    match backend {
        Backend::InProcess => run_local(req, hooks),
        Backend::Command(cmd) => run_command(cmd, req, hooks.cancel),
    }
}

pub fn run_local(req: &PlanRequest, hooks: Hooks) -> Result<PlanResponse> {
    let (ctx, snapshot_time) = request_context(req)?;
    let cfg = &req.config;
    let res = match (&req.previous, cfg.mode) {
        (Some(prev), Mode::Replan) => moea::replan(&ctx, prev, cfg, hooks)?,
        _ => moea::plan(&ctx, cfg, hooks)?,
    };
    build_response(&ctx, &res, cfg.mode, snapshot_time, req.rank)
}

fn run_command(cmd: &str, req: &PlanRequest, cancel: Option<&AtomicBool>) -> Result<PlanResponse> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| ServiceError::External(format!("cannot start `{cmd}`: {e}")))?;
    let input = serde_json::to_vec(req).expect("request serializes");
    let mut stdin = child.stdin.take().expect("piped");
    // a planner may exit before reading everything; that surfaces below
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let mut out = child.stdout.take().expect("piped");
    let mut err = child.stderr.take().expect("piped");
    let out_h = thread::spawn(move || {
        let mut b = Vec::new();
        out.read_to_end(&mut b).map(|_| b)
    });
    let err_h = thread::spawn(move || {
        let mut b = String::new();
        let _ = err.read_to_string(&mut b);
        b
    });
    let status = loop {
        match child.try_wait() {
            Ok(Some(s)) => break s,
            Ok(None) => {}
            Err(e) => return Err(ServiceError::External(e.to_string())),
        }
        if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ServiceError::External("canceled".into()));
        }
        thread::sleep(Duration::from_millis(20));
    };
    let _ = writer.join();
    let stdout = out_h.join().expect("reader thread").map_err(|e| ServiceError::External(e.to_string()))?;
    let stderr = err_h.join().expect("reader thread");
    if !status.success() {
        let msg = serde_json::from_str::<Problem>(stderr.trim())
            .map(|p| p.title)
            .unwrap_or_else(|_| stderr.trim().to_string());
        return Err(ServiceError::External(format!("`{cmd}` failed ({status}): {msg}")));
    }
    serde_json::from_slice(&stdout).map_err(|e| ServiceError::External(format!("unreadable response: {e}")))
}
