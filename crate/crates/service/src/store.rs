//! Directory-per-mission persistence.
//!
//! ```text
//! <root>/missions/<id>/mission.json
//!                     /elevation.egrid
//!                     /runs/<runId>/{config,result}.json
//!                     /sessions/<id>/{session.json,events.jsonl}
//! ```
//!
//! Whole documents are written to a temporary file in the target directory
//! and renamed over the old one, so a crash leaves either version intact.
//! The event log is append-only.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use skyplan_core::mission::{parse_mission, serialize_mission, Mission};
use skyplan_core::sim::SimEvent;

use crate::error::{Result, ServiceError};
use crate::response::PlanResponse;

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

/// Replacement plan switched into a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AppliedPlan {
    pub run_id: String,
    pub solution_index: usize,
    pub clock: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionRecord {
    pub session_id: String,
    pub mission_id: String,
    pub run_id: String,
    pub solution_index: usize,
    /// Replan runs started from this session, oldest first.
    #[serde(default)]
    pub replans: Vec<String>,
    #[serde(default)]
    pub applied: Vec<AppliedPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub run_id: String,
    pub config: Value,
    pub finished: bool,
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let io = |e: io::Error| ServiceError::io(path, e);
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).expect("plain data");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ServiceError::NotFound(path.display().to_string()),
        _ => ServiceError::io(path, e),
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| ServiceError::io(path, io::Error::new(io::ErrorKind::InvalidData, e)))
}

/// Ids end up in paths.
fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(ServiceError::BadRequest(format!("invalid id {id:?}")))
    }
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let m = root.join("missions");
        fs::create_dir_all(&m).map_err(|e| ServiceError::io(&m, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn mission_dir(&self, id: &str) -> Result<PathBuf> {
        check_id(id)?;
        Ok(self.root.join("missions").join(id))
    }

    fn existing_mission_dir(&self, id: &str) -> Result<PathBuf> {
        let d = self.mission_dir(id)?;
        if d.join("mission.json").is_file() {
            Ok(d)
        } else {
            Err(ServiceError::NotFound(format!("mission {id}")))
        }
    }

    pub fn put_mission(&self, id: &str, m: &Mission) -> Result<()> {
        let p = self.mission_dir(id)?.join("mission.json");
        write_atomic(&p, serialize_mission(m).as_bytes())
    }

    pub fn get_mission(&self, id: &str) -> Result<Mission> {
        let p = self.existing_mission_dir(id)?.join("mission.json");
        Ok(parse_mission(&read_text(&p)?)?)
    }

    pub fn list_missions(&self) -> Result<Vec<String>> {
        list_dirs(&self.root.join("missions"))
    }

    pub fn put_elevation(&self, id: &str, egrid: &str) -> Result<()> {
        let p = self.existing_mission_dir(id)?.join("elevation.egrid");
        write_atomic(&p, egrid.as_bytes())
    }

    pub fn get_elevation(&self, id: &str) -> Result<Option<String>> {
        let p = self.existing_mission_dir(id)?.join("elevation.egrid");
        match fs::read_to_string(&p) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ServiceError::io(p, e)),
        }
    }

    /// Allocates the next run id and stores its config.
    pub fn new_run(&self, mission: &str, config: &Value) -> Result<String> {
        let runs = self.existing_mission_dir(mission)?.join("runs");
        fs::create_dir_all(&runs).map_err(|e| ServiceError::io(&runs, e))?;
        let mut n = list_dirs(&runs)?.len() + 1;
        // create_dir fails on an existing id, so concurrent callers never share one
        let id = loop {
            let id = format!("run-{n:04}");
            match fs::create_dir(runs.join(&id)) {
                Ok(()) => break id,
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => n += 1,
                Err(e) => return Err(ServiceError::io(runs.join(&id), e)),
            }
        };
        write_json(&runs.join(&id).join("config.json"), config)?;
        Ok(id)
    }

    fn run_dir(&self, mission: &str, run: &str) -> Result<PathBuf> {
        check_id(run)?;
        let d = self.existing_mission_dir(mission)?.join("runs").join(run);
        if d.is_dir() {
            Ok(d)
        } else {
            Err(ServiceError::NotFound(format!("run {run} of mission {mission}")))
        }
    }

    pub fn put_result(&self, mission: &str, run: &str, r: &PlanResponse) -> Result<()> {
        write_json(&self.run_dir(mission, run)?.join("result.json"), r)
    }

    pub fn get_result(&self, mission: &str, run: &str) -> Result<PlanResponse> {
        read_json(&self.run_dir(mission, run)?.join("result.json"))
    }

    pub fn get_run_config(&self, mission: &str, run: &str) -> Result<Value> {
        read_json(&self.run_dir(mission, run)?.join("config.json"))
    }

    pub fn list_runs(&self, mission: &str) -> Result<Vec<RunSummary>> {
        let runs = self.existing_mission_dir(mission)?.join("runs");
        let mut out = Vec::new();
        for id in list_dirs(&runs)? {
            let d = runs.join(&id);
            let Ok(config) = read_json(&d.join("config.json")) else {
                // allocated but config not yet written
                continue;
            };
            out.push(RunSummary { finished: d.join("result.json").is_file(), run_id: id, config });
        }
        Ok(out)
    }

    fn session_dir(&self, mission: &str, session: &str) -> Result<PathBuf> {
        check_id(session)?;
        Ok(self.existing_mission_dir(mission)?.join("sessions").join(session))
    }

    pub fn put_session(&self, rec: &SessionRecord) -> Result<()> {
        let d = self.session_dir(&rec.mission_id, &rec.session_id)?;
        write_json(&d.join("session.json"), rec)
    }

    pub fn get_session(&self, mission: &str, session: &str) -> Result<SessionRecord> {
        read_json(&self.session_dir(mission, session)?.join("session.json"))
    }

    pub fn append_events(&self, mission: &str, session: &str, events: &[SimEvent]) -> Result<()> {
        if events.is_empty() {
            return Ok(());
        }
        let d = self.session_dir(mission, session)?;
        let p = d.join("events.jsonl");
        let io = |e: io::Error| ServiceError::io(&p, e);
        fs::create_dir_all(&d).map_err(io)?;
        let mut f = OpenOptions::new().create(true).append(true).open(&p).map_err(io)?;
        let mut buf = String::new();
        for e in events {
            buf.push_str(&e.to_json_line());
            buf.push('\n');
        }
        f.write_all(buf.as_bytes()).map_err(io)?;
        f.sync_data().map_err(io)
    }

    pub fn read_events(&self, mission: &str, session: &str) -> Result<String> {
        let p = self.session_dir(mission, session)?.join("events.jsonl");
        match fs::read_to_string(&p) {
            Ok(t) => Ok(t),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(String::new()),
            Err(e) => Err(ServiceError::io(p, e)),
        }
    }
}

fn list_dirs(dir: &Path) -> Result<Vec<String>> {
    let rd = match fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(ServiceError::io(dir, e)),
    };
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| ServiceError::io(dir, e))?;
        if entry.file_type().map_err(|e| ServiceError::io(entry.path(), e))?.is_dir() {
            out.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    out.sort();
    Ok(out)
}
