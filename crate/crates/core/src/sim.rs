//! Fixed-step execution of a schedule, objective injection, look-ahead
//! snapshots for replanning and hot swapping of the remaining plan.
//!
//! Vehicles follow the timed segments of their [`UavPlan`]. Segments are
//! straight and constant-speed, so a step advances each vehicle by
//! `speed * dt` and burns `rate * dt` exactly, whatever the step size; events
//! carry the instant they happen inside the step.

use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};
use thiserror::Error;

use crate::geo::{geodesic_distance, ElevationGrid, GeoPoint};
use crate::mission::{parse_mission, serialize_mission, Mission, MissionError, Objective, TaskSet};
use crate::plan::{Phase, PlanContext, PlanError, Schedule, Segment, SegmentKind, TaskRecord, UavPlan, UavStart};

pub const DEFAULT_DT: f64 = 0.5;
/// Largest gap between the state a replacement plan assumes and the live
/// state at switch-over.
pub const DRIFT_POSITION_M: f64 = 50.0;
/// As a fraction of the vehicle's initial fuel load.
pub const DRIFT_FUEL_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("schedule does not match the mission: {0}")]
    Mismatch(String),
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("{uav} drifted {position_m:.1} m / {fuel_kg:.3} kg from the replacement plan; replan again")]
    Drift { uav: String, position_m: f64, fuel_kg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavStatus {
    Parked,
    Enroute,
    Loitering,
    Performing,
    Returning,
    Landed,
    /// Ran dry; halted where it was.
    Fault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Active,
    Done,
    Obsolete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    WaypointPassed,
    TaskStarted,
    TaskCompleted,
    PlanSwitched,
    ObjectiveInjected,
    UavFault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub t: f64,
    pub kind: EventKind,
    pub subject: String,
    pub detail: Value,
}

impl SimEvent {
    /// One JSON line, no trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }
}

/// Event log as newline-terminated JSON lines.
pub fn events_to_jsonl(events: &[SimEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json_line());
        out.push('\n');
    }
    out
}

/// Fuel, distance and flight time spent on a track over an interval.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Spent {
    fuel_kg: f64,
    distance_m: f64,
    time_s: f64,
}

fn spent(track: &[Segment], a: f64, b: f64) -> Spent {
    let mut s = Spent::default();
    for seg in track {
        let lo = seg.t0.max(a);
        let hi = seg.t1.min(b);
        if hi <= lo {
            continue;
        }
        let d = hi - lo;
        s.fuel_kg += seg.fuel_rate_kg_s * d;
        s.time_s += d;
        if seg.duration() > 0.0 {
            s.distance_m += seg.length_m * d / seg.duration();
        }
    }
    s
}

/// Cuts a segment at `t`, keeping the part before (`head`) or after.
fn split(seg: &Segment, t: f64, head: bool) -> Segment {
    let p = seg.position_at(t);
    let f = if seg.duration() > 0.0 { (t - seg.t0) / seg.duration() } else { 1.0 };
    let mut s = *seg;
    if head {
        s.t1 = t;
        s.to = p;
        s.length_m = seg.length_m * f;
    } else {
        s.t0 = t;
        s.from = p;
        s.length_m = seg.length_m * (1.0 - f);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavSim {
    pub name: String,
    pub position: GeoPoint,
    pub fuel_kg: f64,
    pub status: UavStatus,
    /// Segment in progress (equals the track length once it is flown).
    pub segment: usize,
    /// Completed share of that segment.
    pub fraction: f64,
    pub elapsed_s: f64,
    pub flown_m: f64,
    /// Initial fuel load, the reference of the drift tolerance.
    pub fuel_load_kg: f64,
    parked_at: GeoPoint,
    track: Vec<Segment>,
    /// Whether the end of each segment is a real waypoint (false for cuts
    /// made at a plan switch).
    marks: Vec<bool>,
}

impl UavSim {
    fn new(name: String, plan: &UavPlan, fuel_load_kg: f64) -> Self {
        let mut u = Self {
            name,
            position: plan.start.position,
            fuel_kg: plan.start.fuel_kg,
            status: UavStatus::Parked,
            segment: 0,
            fraction: 0.0,
            elapsed_s: plan.start.elapsed_s,
            flown_m: plan.start.flown_m,
            fuel_load_kg,
            parked_at: plan.start.position,
            track: plan.segments.clone(),
            marks: plan.segments.iter().map(|s| s.kind != SegmentKind::Hold).collect(),
        };
        u.locate(plan.start.time);
        u
    }

    pub fn track(&self) -> &[Segment] {
        &self.track
    }

    fn departure(&self) -> Option<f64> {
        self.track.first().map(|s| s.t0)
    }

    fn landing(&self) -> Option<f64> {
        self.track.last().map(|s| s.t1)
    }

    fn position_at(&self, t: f64) -> GeoPoint {
        match self.departure() {
            Some(d) if t >= d => {
                let i = self.track.partition_point(|s| s.t0 <= t).saturating_sub(1);
                self.track[i].position_at(t)
            }
            _ => self.parked_at,
        }
    }

    fn airborne_at(&self, t: f64) -> bool {
        self.track.iter().any(|s| s.t0 <= t && t < s.t1)
    }

    /// Sets position, cursor and status for time `t`; fuel is left alone.
    fn locate(&mut self, t: f64) {
        if self.status == UavStatus::Fault {
            return;
        }
        self.position = self.position_at(t);
        let k = self.track.partition_point(|s| s.t1 <= t);
        self.segment = k;
        self.fraction = match self.track.get(k) {
            Some(s) if s.duration() > 0.0 => ((t - s.t0) / s.duration()).clamp(0.0, 1.0),
            _ => 0.0,
        };
        self.status = match (self.departure(), self.landing()) {
            // on the ground between two flights
            (Some(a), Some(b)) if t > a && t < b && self.track[k].t0 > t => UavStatus::Landed,
            (Some(a), Some(b)) if t > a && t < b => match self.track[k].phase {
                Phase::Transit => UavStatus::Enroute,
                Phase::Wait => UavStatus::Loitering,
                Phase::Task => UavStatus::Performing,
                Phase::Return => UavStatus::Returning,
            },
            (Some(_), Some(b)) if t >= b => UavStatus::Landed,
            _ => UavStatus::Parked,
        };
    }
}

/// Live state of an executing mission.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub clock: f64,
    pub mission: Mission,
    pub tasks: TaskSet,
    pub uavs: Vec<UavSim>,
    pub task_status: Vec<TaskStatus>,
    /// Record of the plan in force (or the one a finished task ran with).
    pub records: Vec<Option<TaskRecord>>,
    pub events: Vec<SimEvent>,
}

/// Serialisable view of the observable state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimView {
    pub clock: f64,
    pub uavs: Vec<UavView>,
    pub tasks: Vec<TaskView>,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UavView {
    pub name: String,
    pub position: GeoPoint,
    pub fuel_kg: f64,
    pub status: UavStatus,
    pub segment: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskView {
    pub id: String,
    pub status: TaskStatus,
    /// False for injected objectives not yet in any plan.
    pub assigned: bool,
}

impl SimState {
    /// Everyone parked, every task pending, clock at 0.
    pub fn start(mission: &Mission, schedule: &Schedule) -> Result<Self, SimError> {
        let tasks = mission.tasks()?;
        if schedule.uavs.len() != mission.uavs.len() {
            return Err(SimError::Mismatch(format!(
                "{} UAV plans for {} UAVs",
                schedule.uavs.len(),
                mission.uavs.len()
            )));
        }
        if schedule.tasks.len() != tasks.len() {
            return Err(SimError::Mismatch(format!("{} task slots for {} tasks", schedule.tasks.len(), tasks.len())));
        }
        for (t, r) in schedule.tasks.iter().enumerate() {
            if let Some(r) = r {
                if r.task != t || r.uavs.iter().any(|&u| u >= mission.uavs.len()) {
                    return Err(SimError::Mismatch(format!("record of task {t} is inconsistent")));
                }
            }
        }
        let uavs = mission
            .uavs
            .iter()
            .zip(&schedule.uavs)
            .map(|(u, p)| {
                let mut s = UavSim::new(u.name.clone(), p, u.fuel_kg);
                s.locate(0.0);
                s
            })
            .collect();
        Ok(Self {
            clock: 0.0,
            mission: mission.clone(),
            task_status: vec![TaskStatus::Pending; tasks.len()],
            tasks,
            uavs,
            records: schedule.tasks.clone(),
            events: Vec::new(),
        })
    }

    /// True once nothing is left to fly or perform.
    pub fn is_finished(&self) -> bool {
        let flying =
            self.uavs.iter().any(|u| u.status != UavStatus::Fault && u.landing().is_some_and(|b| b > self.clock));
        let working = self
            .task_status
            .iter()
            .zip(&self.records)
            .any(|(s, r)| matches!(s, TaskStatus::Pending | TaskStatus::Active) && r.is_some());
        !flying && !working
    }

    /// Advances the clock by `dt`.
    pub fn tick(&mut self, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidStep(dt));
        }
        let (a, b) = (self.clock, self.clock + dt);
        // (time, class, index, event); sorting by the first three keeps the
        // log independent of iteration order
        let mut batch: Vec<(f64, u8, usize, SimEvent)> = Vec::new();
        for (i, u) in self.uavs.iter_mut().enumerate() {
            if u.status == UavStatus::Fault {
                continue;
            }
            let s = spent(&u.track, a, b);
            if s.fuel_kg > u.fuel_kg + 1e-9 {
                // find when the tank ran dry and stop there
                let mut left = u.fuel_kg;
                let mut at = b;
                for seg in &u.track {
                    let (lo, hi) = (seg.t0.max(a), seg.t1.min(b));
                    if hi <= lo {
                        continue;
                    }
                    let need = seg.fuel_rate_kg_s * (hi - lo);
                    if need >= left {
                        at = lo + left / seg.fuel_rate_kg_s;
                        break;
                    }
                    left -= need;
                }
                let s = spent(&u.track, a, at);
                u.elapsed_s += s.time_s;
                u.flown_m += s.distance_m;
                u.fuel_kg = 0.0;
                u.locate(at);
                u.status = UavStatus::Fault;
                batch.push((
                    at,
                    0,
                    i,
                    SimEvent {
                        t: at,
                        kind: EventKind::UavFault,
                        subject: u.name.clone(),
                        detail: json!({ "reason": "fuel exhausted", "position": u.position }),
                    },
                ));
                continue;
            }
            u.fuel_kg -= s.fuel_kg;
            u.elapsed_s += s.time_s;
            u.flown_m += s.distance_m;
            let from = u.segment;
            u.locate(b);
            for k in from..u.segment {
                if u.marks[k] {
                    let seg = &u.track[k];
                    batch.push((
                        seg.t1,
                        1,
                        i,
                        SimEvent {
                            t: seg.t1,
                            kind: EventKind::WaypointPassed,
                            subject: u.name.clone(),
                            detail: json!({ "index": k, "position": seg.to, "phase": seg.phase }),
                        },
                    ));
                }
            }
        }
        for t in 0..self.task_status.len() {
            let Some(r) = &self.records[t] else { continue };
            let id = &self.tasks.tasks[t].id;
            if self.task_status[t] == TaskStatus::Pending && r.start <= b {
                self.task_status[t] = TaskStatus::Active;
                batch.push((
                    r.start,
                    2,
                    t,
                    SimEvent {
                        t: r.start,
                        kind: EventKind::TaskStarted,
                        subject: id.clone(),
                        detail: json!({ "uavs": self.uav_names(&r.uavs), "sensor": r.sensor }),
                    },
                ));
            }
            if self.task_status[t] == TaskStatus::Active && r.end <= b {
                self.task_status[t] = TaskStatus::Done;
                batch.push((
                    r.end,
                    3,
                    t,
                    SimEvent {
                        t: r.end,
                        kind: EventKind::TaskCompleted,
                        subject: id.clone(),
                        detail: json!({ "uavs": self.uav_names(&r.uavs) }),
                    },
                ));
            }
        }
        batch.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        self.events.extend(batch.into_iter().map(|e| e.3));
        self.clock = b;
        Ok(())
    }

    /// Ticks with step `dt` until the clock reaches `t` (the last step may
    /// be shorter).
    pub fn advance_to(&mut self, t: f64, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidStep(dt));
        }
        while self.clock < t {
            let step = dt.min(t - self.clock);
            if step <= 1e-12 {
                self.clock = t;
                break;
            }
            self.tick(step)?;
        }
        Ok(())
    }

    /// Ticks until [`is_finished`](Self::is_finished).
    pub fn run_to_end(&mut self, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidStep(dt));
        }
        while !self.is_finished() {
            self.tick(dt)?;
        }
        Ok(())
    }

    fn uav_names(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&u| self.mission.uavs[u].name.clone()).collect()
    }

    /// Adds an objective to the mission. Its tasks stay pending and
    /// unassigned; vehicles keep flying the current plan.
    pub fn inject_objective(&mut self, o: Objective) -> Result<(), SimError> {
        let name = o.name.clone();
        let kind = o.otype.clone();
        let mission = self.mission.with_objective(o)?;
        let tasks = mission.tasks()?;
        let added = tasks.len() - self.tasks.len();
        self.mission = mission;
        self.tasks = tasks;
        self.task_status.extend(std::iter::repeat_n(TaskStatus::Pending, added));
        self.records.extend(std::iter::repeat_n(None, added));
        self.events.push(SimEvent {
            t: self.clock,
            kind: EventKind::ObjectiveInjected,
            subject: name,
            detail: json!({ "type": kind, "tasks": added }),
        });
        Ok(())
    }

    pub fn view(&self) -> SimView {
        SimView {
            clock: self.clock,
            uavs: self
                .uavs
                .iter()
                .map(|u| UavView {
                    name: u.name.clone(),
                    position: u.position,
                    fuel_kg: u.fuel_kg,
                    status: u.status,
                    segment: u.segment,
                    fraction: u.fraction,
                })
                .collect(),
            tasks: self
                .tasks
                .tasks
                .iter()
                .enumerate()
                .map(|(t, task)| TaskView {
                    id: task.id.clone(),
                    status: self.task_status[t],
                    assigned: self.records[t].is_some(),
                })
                .collect(),
            finished: self.is_finished(),
        }
    }

    /// Projects the state `delta` seconds ahead without touching it.
    ///
    /// Tasks finished or under way by then are frozen with their records.
    /// A vehicle busy on such a task becomes available where and when its
    /// share of the task ends.
    pub fn snapshot_at(&self, delta: f64) -> Result<SimSnapshot, SimError> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(SimError::InvalidStep(delta));
        }
        let mut p = self.clone();
        let at = self.clock + delta;
        if delta > 0.0 {
            p.tick(delta)?;
        }
        let mut uavs = Vec::new();
        for (i, u) in p.uavs.iter().enumerate() {
            let busy_on = u
                .track
                .get(u.segment)
                .filter(|s| u.status == UavStatus::Performing && s.phase == Phase::Task)
                .and_then(|s| s.task);
            let free_at = busy_on
                .and_then(|t| {
                    let r = p.records[t].as_ref()?;
                    let k = r.uavs.iter().position(|&x| x == i)?;
                    Some(r.ends[k])
                })
                .unwrap_or(at)
                .max(at);
            let s = spent(&u.track, at, free_at);
            let airborne = u.status != UavStatus::Fault && u.airborne_at(free_at);
            uavs.push(UavSnapshot {
                name: u.name.clone(),
                status: u.status,
                position: u.position,
                fuel_kg: u.fuel_kg,
                busy_with: busy_on.map(|t| p.tasks.tasks[t].id.clone()),
                start: UavStart {
                    time: free_at,
                    position: if u.status == UavStatus::Fault { u.position } else { u.position_at(free_at) },
                    fuel_kg: u.fuel_kg - s.fuel_kg,
                    airborne,
                    elapsed_s: u.elapsed_s + s.time_s,
                    flown_m: u.flown_m + s.distance_m,
                },
            });
        }
        let frozen = p
            .records
            .iter()
            .zip(&p.task_status)
            .map(|(r, s)| match s {
                TaskStatus::Active | TaskStatus::Done => r.clone().map(|r| TaskRecord { frozen: true, ..r }),
                _ => None,
            })
            .collect();
        Ok(SimSnapshot {
            snapshot_time: at,
            taken_at: self.clock,
            uavs,
            tasks: p.task_status.clone(),
            frozen,
            mission: p.mission,
        })
    }

    /// Swaps in a plan made from `snap`. Each vehicle switches when its new
    /// plan starts (or now, if that is already past) provided the live
    /// state there matches what the plan assumed.
    pub fn apply_replacement(&mut self, snap: &SimSnapshot, new: &Schedule) -> Result<(), SimError> {
        let tasks = snap.mission.tasks()?;
        if snap.mission.uavs.len() != self.uavs.len() || new.uavs.len() != self.uavs.len() {
            return Err(SimError::Mismatch("UAV count differs from the running mission".into()));
        }
        if new.tasks.len() != tasks.len() || tasks.len() < self.tasks.len() {
            return Err(SimError::Mismatch(format!("{} task slots for {} tasks", new.tasks.len(), tasks.len())));
        }
        let mut switch = Vec::new();
        for (u, plan) in self.uavs.iter().zip(&new.uavs) {
            let at = plan.start.time.max(self.clock);
            let live_pos = if u.status == UavStatus::Fault { u.position } else { u.position_at(at) };
            let live_fuel = u.fuel_kg - spent(&u.track, self.clock, at).fuel_kg;
            let plan_pos = plan.position_at(at);
            let plan_fuel = plan.start.fuel_kg - spent(&plan.segments, plan.start.time, at).fuel_kg;
            let dz = match (live_pos.alt, plan_pos.alt) {
                (Some(a), Some(b)) => a - b,
                _ => 0.0,
            };
            let dpos = geodesic_distance(&live_pos, &plan_pos).hypot(dz);
            let dfuel = (live_fuel - plan_fuel).abs();
            if dpos > DRIFT_POSITION_M || dfuel > DRIFT_FUEL_FRACTION * u.fuel_load_kg {
                return Err(SimError::Drift { uav: u.name.clone(), position_m: dpos, fuel_kg: dfuel });
            }
            switch.push(at);
        }

        for (i, (u, plan)) in self.uavs.iter_mut().zip(&new.uavs).enumerate() {
            let at = switch[i];
            let mut track = Vec::new();
            let mut marks = Vec::new();
            for (k, s) in u.track.iter().enumerate() {
                if s.t1 <= at {
                    track.push(*s);
                    marks.push(u.marks[k]);
                } else if s.t0 < at {
                    track.push(split(s, at, true));
                    marks.push(false);
                }
            }
            for s in &plan.segments {
                if s.t0 >= at {
                    track.push(*s);
                    marks.push(s.kind != SegmentKind::Hold);
                } else if s.t1 > at {
                    track.push(split(s, at, false));
                    marks.push(s.kind != SegmentKind::Hold);
                }
            }
            if u.departure().is_none_or(|d| d > at) && track.is_empty() {
                u.parked_at = plan.start.position;
            }
            u.track = track;
            u.marks = marks;
            u.locate(self.clock);
        }
        let added = tasks.len() - self.tasks.len();
        self.task_status.extend(std::iter::repeat_n(TaskStatus::Pending, added));
        self.records.extend(std::iter::repeat_n(None, added));
        for t in 0..tasks.len() {
            match self.task_status[t] {
                TaskStatus::Pending => {
                    self.records[t] = new.tasks[t].clone();
                    if self.records[t].is_none() {
                        self.task_status[t] = TaskStatus::Obsolete;
                    }
                }
                // running or finished work keeps the record it ran with
                TaskStatus::Active | TaskStatus::Done => {}
                TaskStatus::Obsolete => {
                    if let Some(r) = &new.tasks[t] {
                        self.records[t] = Some(r.clone());
                        self.task_status[t] = TaskStatus::Pending;
                    }
                }
            }
        }
        self.mission = snap.mission.clone();
        self.tasks = tasks;
        let detail: Vec<Value> =
            self.uavs.iter().zip(&switch).map(|(u, t)| json!({ "uav": u.name, "at": t })).collect();
        self.events.push(SimEvent {
            t: self.clock,
            kind: EventKind::PlanSwitched,
            subject: self.mission.name.clone(),
            detail: json!({ "switch": detail, "snapshotTime": snap.snapshot_time }),
        });
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UavSnapshot {
    pub name: String,
    pub status: UavStatus,
    /// State at the snapshot time.
    pub position: GeoPoint,
    pub fuel_kg: f64,
    /// Task being performed at the snapshot time, if any.
    pub busy_with: Option<String>,
    /// Where, when and how the vehicle is handed to the planner.
    pub start: UavStart,
}

/// State projected to `snapshot_time`, ready for replanning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimSnapshot {
    pub snapshot_time: f64,
    /// Simulation clock when the snapshot was taken.
    pub taken_at: f64,
    pub uavs: Vec<UavSnapshot>,
    pub tasks: Vec<TaskStatus>,
    /// Records of tasks under way or finished by `snapshot_time`.
    pub frozen: Vec<Option<TaskRecord>>,
    #[serde(serialize_with = "ser_mission", deserialize_with = "de_mission")]
    pub mission: Mission,
}

fn ser_mission<S: Serializer>(m: &Mission, s: S) -> Result<S::Ok, S::Error> {
    let v: Value = serde_json::from_str(&serialize_mission(m)).map_err(serde::ser::Error::custom)?;
    v.serialize(s)
}

fn de_mission<'de, D: Deserializer<'de>>(d: D) -> Result<Mission, D::Error> {
    let v = Value::deserialize(d)?;
    parse_mission(&v.to_string()).map_err(serde::de::Error::custom)
}

impl SimSnapshot {
    pub fn starts(&self) -> Vec<UavStart> {
        self.uavs.iter().map(|u| u.start).collect()
    }

    /// Planning context for the remaining mission.
    pub fn plan_context(&self, grid: Arc<ElevationGrid>) -> Result<PlanContext, SimError> {
        let ctx = PlanContext::new(self.mission.clone(), grid)?;
        if ctx.n_tasks() != self.frozen.len() {
            return Err(SimError::Mismatch(format!(
                "snapshot has {} task slots, mission has {} tasks",
                self.frozen.len(),
                ctx.n_tasks()
            )));
        }
        Ok(ctx.with_state(self.snapshot_time, self.starts(), self.frozen.clone())?)
    }
}
