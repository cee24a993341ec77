//! Plan encoding, decoding into timed trajectories, and evaluation.
//!
//! A [`PlanGenome`] fixes who does what, in which order, with which flight
//! profile, sensor and ground station. [`decode_schedule`] turns it into a
//! [`Schedule`] of timed track segments using earliest-start semantics, and
//! [`evaluate`] measures the schedule.

mod decode;
mod evaluate;
mod genome;

pub use decode::decode_schedule;
pub use evaluate::{
    closeness_risk, closest_approach, evaluate, min_separation, risk_interp, EvaluationReport, Objectives,
    RiskDirection, Risks, UavPerformance, OBJECTIVE_NAMES,
};
pub use genome::{Assignment, GenomeDoc, GenomeTask, GenomeUav, PlanGenome};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{geodesic_distance, ElevationGrid, GeoError, GeoPoint, Router, DEFAULT_NFZ_MARGIN_M};
use crate::mission::{
    Catalog, Mission, MissionError, ObjectiveGeometry, ProfileKind, TaskSet, ValidationError, VehicleType,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("gene {gene}: {message}")]
    Decode { gene: String, message: String },
    #[error("invalid risk interval [{low}, {high}]")]
    InvalidInterval { low: f64, high: f64 },
    #[error("planning context mismatch: {0}")]
    Context(String),
}

impl PlanError {
    fn decode(gene: impl Into<String>, message: impl Into<String>) -> Self {
        PlanError::Decode { gene: gene.into(), message: message.into() }
    }
}

/// Where and in what state a vehicle becomes available to the planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UavStart {
    pub time: f64,
    /// Carries the altitude (MSL) the vehicle is at.
    pub position: GeoPoint,
    pub fuel_kg: f64,
    pub airborne: bool,
    /// Flight time and distance already flown before `time`.
    #[serde(default)]
    pub elapsed_s: f64,
    #[serde(default)]
    pub flown_m: f64,
}

/// Sampling resolutions used by evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub coverage_step_s: f64,
    pub los_step_m: f64,
    pub clearance_step_m: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { coverage_step_s: 1.0, los_step_m: 50.0, clearance_step_m: 100.0 }
    }
}

/// Everything about a mission that stays fixed while many genomes are
/// decoded and evaluated. Shareable across threads.
#[derive(Debug)]
pub struct PlanContext {
    pub mission: Mission,
    pub grid: Arc<ElevationGrid>,
    pub tasks: TaskSet,
    pub router: Router,
    pub resolution: Resolution,
    /// Vehicle type of each UAV.
    pub vtypes: Vec<VehicleType>,
    pub starts: Vec<UavStart>,
    /// Landing altitude of each UAV.
    pub home_alt: Vec<f64>,
    /// GCS antenna positions with altitude.
    pub gcs_pos: Vec<GeoPoint>,
    /// Records of tasks already started or finished; their genes are locked.
    pub frozen: Vec<Option<TaskRecord>>,
    /// Earliest time new work may begin.
    pub origin: f64,
    /// Cruise profiles the planner may choose from.
    pub profiles: Vec<ProfileKind>,
    /// For each task and sensor option, the UAVs carrying that sensor.
    pub(crate) carriers: Vec<Vec<Vec<usize>>>,
}

impl PlanContext {
    pub fn new(mission: Mission, grid: Arc<ElevationGrid>) -> Result<Self, PlanError> {
        let catalog = Catalog::builtin();
        let tasks = TaskSet::build(&mission, catalog)?;
        let b = grid.bounds();
        let mb = &mission.bounds;
        let covers = [GeoPoint::new(mb.lat0, mb.lon0), GeoPoint::new(mb.lat1, mb.lon1)].iter().all(|p| b.contains(p));
        if !covers {
            return Err(PlanError::Context("elevation grid does not cover the mission bounds".into()));
        }
        let zones: Vec<_> = mission.nfzs.iter().map(|z| z.zone.clone()).collect();
        let router = Router::new(&zones, DEFAULT_NFZ_MARGIN_M, Some(&mission.bounds));

        let mut errs = Vec::new();
        let mut blocked = |path: String, p: &GeoPoint| {
            if router.is_blocked(p) {
                errs.push(ValidationError::new(path, "inside or too close to a no-fly zone"));
            }
        };
        for (i, u) in mission.uavs.iter().enumerate() {
            blocked(format!("uavs[{i}].position"), &u.position);
            for q in [u.departure_runway_end, u.landing_track_start, u.end_position].into_iter().flatten() {
                blocked(format!("uavs[{i}]"), &q);
            }
        }
        for (i, o) in mission.objectives.iter().enumerate() {
            let mut pts = vec![o.geometry.entry_point(), o.geometry.exit_point()];
            match &o.geometry {
                ObjectiveGeometry::Zone { zone, .. } => pts.push(zone.centroid()),
                ObjectiveGeometry::Path { points } => pts.extend(points.iter().copied()),
                ObjectiveGeometry::Point { .. } => {}
            }
            for p in pts {
                blocked(format!("objectives[{i}].geometry"), &p);
            }
        }

        let vtypes: Vec<VehicleType> =
            mission.uavs.iter().map(|u| catalog.vehicle_type(&u.vtype).cloned().expect("validated type")).collect();
        let mut starts = Vec::new();
        let mut home_alt = Vec::new();
        for u in &mission.uavs {
            let ground = match u.position.alt {
                Some(a) => a,
                None => grid.elevation_at(&u.position)?,
            };
            let home = u.home();
            home_alt.push(match home.alt {
                Some(a) => a,
                None => grid.elevation_at(&home)?,
            });
            starts.push(UavStart {
                time: u.availability.map_or(0.0, |a| a.start.max(0.0)),
                position: u.position.at_alt(ground),
                fuel_kg: u.fuel_kg,
                airborne: false,
                elapsed_s: 0.0,
                flown_m: 0.0,
            });
        }
        let gcs_pos = mission
            .gcss
            .iter()
            .map(|g| {
                Ok(match g.position.alt {
                    Some(_) => g.position,
                    None => g.position.at_alt(grid.elevation_at(&g.position)? + 2.0),
                })
            })
            .collect::<Result<Vec<_>, GeoError>>()?;

        let mut carriers = Vec::new();
        for (t, task) in tasks.tasks.iter().enumerate() {
            let per_sensor: Vec<Vec<usize>> = task
                .sensors
                .iter()
                .map(|s| (0..mission.uavs.len()).filter(|&u| mission.uavs[u].has_sensor(s)).collect())
                .collect();
            if task.mandatory && per_sensor.iter().all(|c| c.is_empty()) {
                let oi = tasks.objective_of[t];
                errs.push(ValidationError::new(
                    format!("objectives[{oi}]"),
                    format!("mandatory task {} has no UAV carrying a suitable sensor", task.id),
                ));
            }
            carriers.push(per_sensor);
        }
        if !errs.is_empty() {
            return Err(MissionError::Validation(errs).into());
        }

        let n_tasks = tasks.len();
        Ok(Self {
            mission,
            grid,
            tasks,
            router,
            resolution: Resolution::default(),
            vtypes,
            starts,
            home_alt,
            gcs_pos,
            frozen: vec![None; n_tasks],
            origin: 0.0,
            profiles: ProfileKind::CRUISE.to_vec(),
            carriers,
        })
    }

    /// Context for planning from a later state: vehicles start where
    /// `starts` puts them and tasks with a record in `frozen` are kept as
    /// they are.
    pub fn with_state(
        mut self,
        origin: f64,
        starts: Vec<UavStart>,
        frozen: Vec<Option<TaskRecord>>,
    ) -> Result<Self, PlanError> {
        if starts.len() != self.mission.uavs.len() || frozen.len() != self.tasks.len() {
            return Err(PlanError::Context(format!(
                "expected {} UAV states and {} task slots, got {} and {}",
                self.mission.uavs.len(),
                self.tasks.len(),
                starts.len(),
                frozen.len()
            )));
        }
        for (t, rec) in frozen.iter().enumerate() {
            if let Some(r) = rec {
                if r.task != t || r.uavs.iter().any(|&u| u >= starts.len()) {
                    return Err(PlanError::Context(format!("frozen record for task {t} is inconsistent")));
                }
            }
        }
        self.origin = origin;
        self.starts = starts.into_iter().map(|s| UavStart { time: s.time.max(origin), ..s }).collect();
        self.frozen = frozen;
        Ok(self)
    }

    /// Restricts leg profiles to `profiles` (a non-empty subset of the
    /// cruise profiles).
    pub fn with_profiles(mut self, profiles: &[ProfileKind]) -> Result<Self, PlanError> {
        if profiles.is_empty() || profiles.iter().any(|p| !ProfileKind::CRUISE.contains(p)) {
            return Err(PlanError::Context("profiles must be a non-empty set of cruise profiles".into()));
        }
        let mut p = profiles.to_vec();
        p.sort();
        p.dedup();
        self.profiles = p;
        Ok(self)
    }

    pub fn n_uavs(&self) -> usize {
        self.mission.uavs.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_frozen(&self, task: usize) -> bool {
        self.frozen[task].is_some()
    }

    /// Sensor options of `task` that at least one UAV carries.
    pub fn usable_sensors(&self, task: usize) -> Vec<usize> {
        (0..self.carriers[task].len()).filter(|&s| !self.carriers[task][s].is_empty()).collect()
    }

    pub fn carriers(&self, task: usize, sensor: usize) -> &[usize] {
        &self.carriers[task][sensor]
    }

    /// GCSs able to control `uav`; every GCS when none can.
    pub fn gcs_options(&self, uav: usize) -> Vec<usize> {
        let vt = &self.mission.uavs[uav].vtype;
        let ok: Vec<usize> =
            (0..self.mission.gcss.len()).filter(|&g| self.mission.gcss[g].controllable_types.contains(vt)).collect();
        if ok.is_empty() {
            (0..self.mission.gcss.len()).collect()
        } else {
            ok
        }
    }

    pub fn task_duration(&self, task: usize) -> f64 {
        let o = &self.mission.objectives[self.tasks.objective_of[task]];
        o.duration_s.unwrap_or(0.0)
    }

    /// Horizontal distance from a GCS to a point.
    pub fn gcs_distance(&self, gcs: usize, p: &GeoPoint) -> f64 {
        geodesic_distance(&self.gcs_pos[gcs], p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Climb,
    Cruise,
    Descent,
    /// Stationary loiter.
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Transit,
    Wait,
    Task,
    Return,
}

/// Straight, constant-speed piece of a trajectory. Positions carry altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub from: GeoPoint,
    pub to: GeoPoint,
    pub kind: SegmentKind,
    pub phase: Phase,
    pub profile: ProfileKind,
    pub speed_mps: f64,
    pub fuel_rate_kg_s: f64,
    /// Slant length in metres.
    pub length_m: f64,
    pub task: Option<usize>,
    /// Part of the initial take-off climb or the final landing descent.
    pub terminal: bool,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn fuel_kg(&self) -> f64 {
        self.fuel_rate_kg_s * self.duration()
    }

    /// Position at time `t`, clamped to the segment.
    pub fn position_at(&self, t: f64) -> GeoPoint {
        let d = self.duration();
        if d <= 0.0 {
            return self.to;
        }
        self.from.lerp(&self.to, ((t - self.t0) / d).clamp(0.0, 1.0))
    }
}

/// One flight leg: towards a task, or back home when `task` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegRecord {
    pub task: Option<usize>,
    pub profile: ProfileKind,
    pub departure: f64,
    pub arrival: f64,
    pub wait_s: f64,
    pub distance_m: f64,
    pub fuel_kg: f64,
    /// Horizontal waypoints of the leg.
    pub waypoints: Vec<GeoPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavPlan {
    pub uav: usize,
    pub gcs: Option<usize>,
    /// Tasks in flying order, frozen ones excluded.
    pub tasks: Vec<usize>,
    pub legs: Vec<LegRecord>,
    pub segments: Vec<Segment>,
    pub start: UavStart,
}

impl UavPlan {
    pub fn is_used(&self) -> bool {
        !self.segments.is_empty()
    }

    pub fn departure(&self) -> Option<f64> {
        self.segments.first().map(|s| s.t0)
    }

    pub fn landing(&self) -> Option<f64> {
        self.segments.last().map(|s| s.t1)
    }

    pub fn fuel_burned(&self) -> f64 {
        self.segments.iter().map(Segment::fuel_kg).sum()
    }

    pub fn distance(&self) -> f64 {
        self.segments.iter().map(|s| s.length_m).sum()
    }

    pub fn flight_time(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    /// Index of the segment active at `t` (the last one starting at or
    /// before `t`).
    pub fn segment_at(&self, t: f64) -> Option<usize> {
        if self.segments.is_empty() || t < self.segments[0].t0 {
            return None;
        }
        let i = self.segments.partition_point(|s| s.t0 <= t);
        Some(i.saturating_sub(1))
    }

    /// Position at `t`: parked before departure, at home after landing.
    pub fn position_at(&self, t: f64) -> GeoPoint {
        match self.segment_at(t) {
            None => self.start.position,
            Some(i) => self.segments[i].position_at(t),
        }
    }

    pub fn airborne_at(&self, t: f64) -> bool {
        match (self.departure(), self.landing()) {
            (Some(a), Some(b)) => t >= a && t <= b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskRecord {
    pub task: usize,
    pub uavs: Vec<usize>,
    pub sensor: String,
    pub profile: ProfileKind,
    pub start: f64,
    pub end: f64,
    /// Per assigned UAV: arrival at the task, wait loiter, and own end time.
    pub arrivals: Vec<f64>,
    pub waits: Vec<f64>,
    pub ends: Vec<f64>,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub uavs: Vec<UavPlan>,
    /// `None` for omitted tasks.
    pub tasks: Vec<Option<TaskRecord>>,
    pub origin: f64,
    /// False when earliest-start bounds did not settle (cyclic
    /// dependencies or synchronisation deadlock).
    pub converged: bool,
    pub iterations: usize,
}

impl Schedule {
    pub fn makespan(&self) -> f64 {
        let land = self.uavs.iter().filter_map(UavPlan::landing);
        let ends = self.tasks.iter().flatten().map(|r| r.end);
        land.chain(ends).fold(0.0, f64::max)
    }
}
