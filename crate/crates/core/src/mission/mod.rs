//! Mission documents: vehicles, stations, objectives, no-fly zones,
//! dependencies and the operator profile.
//!
//! Everything here is stored in SI units (metres, seconds, kilograms) with
//! times measured from the mission start. The JSON wire format in [`wire`]
//! uses feet, nautical miles and RFC 3339 timestamps and is converted at the
//! boundary.

mod catalog;
mod tasks;
mod wire;

pub use catalog::{
    Catalog, FlightProfile, FlightProfiles, ObjectiveType, ProfileKind, TaskDependency, TaskTemplate, VehicleType,
};
pub use tasks::{expand_objective, DependencyGroup, Task, TaskSet};
pub use wire::{canonical_json, parse_mission, parse_objective, serialize_mission, MISSION_SCHEMA_VERSION};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{ArcSeconds, GeoPoint, GridBounds, PolygonZone};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationError {
    /// Location of the offending field in the wire document, e.g.
    /// `uavs[2].fuel`.
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MissionError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("mission invalid: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<ValidationError>),
    #[error("catalog error: {0}")]
    Catalog(String),
    #[error("unknown objective type {0:?}")]
    UnknownObjectiveType(String),
}

impl MissionError {
    pub fn validation_errors(&self) -> &[ValidationError] {
        match self {
            MissionError::Validation(v) => v,
            _ => &[],
        }
    }
}

/// Interval in seconds since mission start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uav {
    pub name: String,
    pub vtype: String,
    pub fuel_kg: f64,
    pub position: GeoPoint,
    pub departure_runway_end: Option<GeoPoint>,
    pub landing_track_start: Option<GeoPoint>,
    pub end_position: Option<GeoPoint>,
    pub availability: Option<TimeWindow>,
    pub sensors: Vec<String>,
}

impl Uav {
    pub fn has_sensor(&self, s: &str) -> bool {
        self.sensors.iter().any(|x| x == s)
    }

    /// Where the vehicle lands: the explicit end position, else its start.
    pub fn home(&self) -> GeoPoint {
        self.end_position.unwrap_or(self.position)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gcs {
    pub name: String,
    pub position: GeoPoint,
    pub range_m: f64,
    pub max_vehicles: u32,
    pub controllable_types: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveGeometry {
    Zone { zone: PolygonZone, entry: Option<GeoPoint>, exit: Option<GeoPoint> },
    Path { points: Vec<GeoPoint> },
    Point { position: GeoPoint },
}

impl ObjectiveGeometry {
    pub fn kind(&self) -> &'static str {
        match self {
            ObjectiveGeometry::Zone { .. } => "zone",
            ObjectiveGeometry::Path { .. } => "path",
            ObjectiveGeometry::Point { .. } => "point",
        }
    }

    /// Every position the geometry mentions, in document order.
    pub fn points(&self) -> Vec<GeoPoint> {
        match self {
            ObjectiveGeometry::Zone { zone, entry, exit } => {
                zone.vertices().iter().copied().chain(*entry).chain(*exit).collect()
            }
            ObjectiveGeometry::Path { points } => points.clone(),
            ObjectiveGeometry::Point { position } => vec![*position],
        }
    }

    /// Point where the vehicle starts working on the objective.
    pub fn entry_point(&self) -> GeoPoint {
        match self {
            ObjectiveGeometry::Zone { zone, entry, .. } => entry.unwrap_or_else(|| zone.centroid()),
            ObjectiveGeometry::Path { points } => points[0],
            ObjectiveGeometry::Point { position } => *position,
        }
    }

    /// Point where the vehicle leaves the objective.
    pub fn exit_point(&self) -> GeoPoint {
        match self {
            ObjectiveGeometry::Zone { zone, exit, .. } => exit.unwrap_or_else(|| zone.centroid()),
            ObjectiveGeometry::Path { points } => *points.last().expect("path has points"),
            ObjectiveGeometry::Point { position } => *position,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub name: String,
    pub otype: String,
    pub geometry: ObjectiveGeometry,
    pub time_window: Option<TimeWindow>,
    pub duration_s: Option<f64>,
    pub mandatory: bool,
    pub requires_los: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nfz {
    pub name: String,
    pub zone: PolygonZone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllenRelation {
    Before,
    Meets,
    Overlaps,
    Starts,
    During,
    Finishes,
    Equals,
}

impl AllenRelation {
    pub const ALL: [AllenRelation; 7] = [
        AllenRelation::Before,
        AllenRelation::Meets,
        AllenRelation::Overlaps,
        AllenRelation::Starts,
        AllenRelation::During,
        AllenRelation::Finishes,
        AllenRelation::Equals,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AllenRelation::Before => "before",
            AllenRelation::Meets => "meets",
            AllenRelation::Overlaps => "overlaps",
            AllenRelation::Starts => "starts",
            AllenRelation::During => "during",
            AllenRelation::Finishes => "finishes",
            AllenRelation::Equals => "equals",
        }
    }

    /// Relations whose offset shifts a strict or non-strict gap. The others
    /// pin endpoints together and only admit a zero offset.
    pub fn takes_offset(self) -> bool {
        matches!(self, AllenRelation::Before | AllenRelation::Overlaps | AllenRelation::During)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavRelation {
    Undefined,
    Same,
    Different,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dependency {
    pub first: String,
    pub relation: AllenRelation,
    pub second: String,
    pub uav_relation: UavRelation,
    pub offset_s: f64,
}

/// The twelve quantities the decision support ranks plans by, in column
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RankingVariable {
    Makespan,
    Cost,
    Fuel,
    FlightTime,
    Distance,
    FuelRisk,
    GroundRisk,
    CoverageRisk,
    ClosenessRisk,
    Uavs,
    Tasks,
    Gcss,
}

impl RankingVariable {
    pub const ALL: [RankingVariable; 12] = [
        RankingVariable::Makespan,
        RankingVariable::Cost,
        RankingVariable::Fuel,
        RankingVariable::FlightTime,
        RankingVariable::Distance,
        RankingVariable::FuelRisk,
        RankingVariable::GroundRisk,
        RankingVariable::CoverageRisk,
        RankingVariable::ClosenessRisk,
        RankingVariable::Uavs,
        RankingVariable::Tasks,
        RankingVariable::Gcss,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RankingVariable::Makespan => "makespan",
            RankingVariable::Cost => "cost",
            RankingVariable::Fuel => "fuel",
            RankingVariable::FlightTime => "flightTime",
            RankingVariable::Distance => "distance",
            RankingVariable::FuelRisk => "fuelRisk",
            RankingVariable::GroundRisk => "groundRisk",
            RankingVariable::CoverageRisk => "coverageRisk",
            RankingVariable::ClosenessRisk => "closenessRisk",
            RankingVariable::Uavs => "uavs",
            RankingVariable::Tasks => "tasks",
            RankingVariable::Gcss => "gcss",
        }
    }

    /// Only the number of tasks performed is better when larger.
    pub fn maximized(self) -> bool {
        self == RankingVariable::Tasks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Importance {
    VeryLow,
    Low,
    Medium,
    High,
    VeryHigh,
}

impl Importance {
    pub fn score(self) -> f64 {
        match self {
            Importance::VeryLow => 1.0,
            Importance::Low => 2.0,
            Importance::Medium => 3.0,
            Importance::High => 4.0,
            Importance::VeryHigh => 5.0,
        }
    }
}

/// Hard upper limits; plans above any of them are rejected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    pub makespan_s: Option<f64>,
    pub cost: Option<f64>,
    pub flight_time_s: Option<f64>,
    pub fuel_kg: Option<f64>,
    pub distance_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorProfile {
    pub all_tasks_mandatory: bool,
    pub ground_min_m: f64,
    pub ground_risked_m: f64,
    pub fuel_max_pct: f64,
    pub fuel_risked_pct: f64,
    pub sep_min_m: f64,
    pub sep_risked_m: f64,
    pub coverage_min_s: f64,
    pub coverage_max_s: f64,
    pub importance: BTreeMap<RankingVariable, Importance>,
    pub caps: Caps,
}

impl Default for OperatorProfile {
    fn default() -> Self {
        Self {
            all_tasks_mandatory: false,
            ground_min_m: 100.0,
            ground_risked_m: 300.0,
            fuel_max_pct: 90.0,
            fuel_risked_pct: 50.0,
            sep_min_m: 150.0,
            sep_risked_m: 1000.0,
            coverage_min_s: 0.0,
            coverage_max_s: 300.0,
            importance: RankingVariable::ALL.iter().map(|v| (*v, Importance::Medium)).collect(),
            caps: Caps::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mission {
    pub name: String,
    pub bounds: GridBounds,
    pub arc_seconds: ArcSeconds,
    pub start_time: Option<DateTime<Utc>>,
    pub uavs: Vec<Uav>,
    pub gcss: Vec<Gcs>,
    pub objectives: Vec<Objective>,
    pub nfzs: Vec<Nfz>,
    pub dependencies: Vec<Dependency>,
    pub profile: OperatorProfile,
}

impl Mission {
    /// A mission with no elements covering `bounds`.
    pub fn empty(name: impl Into<String>, bounds: GridBounds, arc_seconds: ArcSeconds) -> Self {
        Self {
            name: name.into(),
            bounds,
            arc_seconds,
            start_time: None,
            uavs: Vec::new(),
            gcss: Vec::new(),
            objectives: Vec::new(),
            nfzs: Vec::new(),
            dependencies: Vec::new(),
            profile: OperatorProfile::default(),
        }
    }

    pub fn uav_index(&self, name: &str) -> Option<usize> {
        self.uavs.iter().position(|u| u.name == name)
    }

    pub fn objective_index(&self, name: &str) -> Option<usize> {
        self.objectives.iter().position(|o| o.name == name)
    }

    pub fn is_mandatory(&self, o: &Objective) -> bool {
        o.mandatory || self.profile.all_tasks_mandatory
    }

    /// Tasks of every objective, in objective order.
    pub fn tasks(&self) -> Result<TaskSet, MissionError> {
        TaskSet::build(self, Catalog::builtin())
    }

    /// Adds an objective after checking it against the rest of the mission.
    pub fn with_objective(&self, o: Objective) -> Result<Mission, MissionError> {
        let mut m = self.clone();
        m.objectives.push(o);
        m.validate().map_err(MissionError::Validation)?;
        Ok(m)
    }

    /// Checks every invariant of the document against the built-in catalog.
    pub fn validate(&self) -> Result<(), Vec<ValidationError>> {
        self.validate_with(Catalog::builtin())
    }

    pub fn validate_with(&self, catalog: &Catalog) -> Result<(), Vec<ValidationError>> {
        let mut errs = Vec::new();
        let mut err = |p: String, m: String| errs.push(ValidationError::new(p, m));

        if self.name.trim().is_empty() {
            err("name".into(), "must not be empty".into());
        }
        if let Err(e) = self.bounds.validate() {
            err("bounds".into(), e.to_string());
        }
        let inside = |p: &GeoPoint| p.validate().is_ok() && self.bounds.contains(p);

        let mut names: HashSet<&str> = HashSet::new();
        let element_names: Vec<(String, &str)> = self
            .uavs
            .iter()
            .enumerate()
            .map(|(i, u)| (format!("uavs[{i}].name"), u.name.as_str()))
            .chain(self.gcss.iter().enumerate().map(|(i, g)| (format!("gcss[{i}].name"), g.name.as_str())))
            .chain(self.objectives.iter().enumerate().map(|(i, o)| (format!("objectives[{i}].name"), o.name.as_str())))
            .chain(self.nfzs.iter().enumerate().map(|(i, z)| (format!("nfzs[{i}].name"), z.name.as_str())))
            .collect();
        for (path, name) in element_names {
            if name.trim().is_empty() {
                err(path, "must not be empty".into());
            } else if !names.insert(name) {
                err(path, format!("duplicate element name {name:?}"));
            }
        }

        let time_ok = |tw: &TimeWindow| tw.start.is_finite() && tw.end.is_finite() && tw.start < tw.end;

        for (i, u) in self.uavs.iter().enumerate() {
            let p = format!("uavs[{i}]");
            let vt = catalog.vehicle_type(&u.vtype);
            if vt.is_none() {
                err(format!("{p}.type"), format!("unknown vehicle type {:?}", u.vtype));
            }
            if !(u.fuel_kg >= 0.0) || !u.fuel_kg.is_finite() {
                err(format!("{p}.fuel"), "must be a non-negative number".into());
            } else if let Some(vt) = vt {
                if u.fuel_kg > vt.max_fuel_kg {
                    err(
                        format!("{p}.fuel"),
                        format!("{} kg exceeds the {} capacity of {} kg", u.fuel_kg, vt.name, vt.max_fuel_kg),
                    );
                }
            }
            if !inside(&u.position) {
                err(format!("{p}.position"), "outside the mission bounds".into());
            }
            for (key, opt) in [
                ("departureRunwayEnd", &u.departure_runway_end),
                ("landingTrackStart", &u.landing_track_start),
                ("endPosition", &u.end_position),
            ] {
                if let Some(q) = opt {
                    if !inside(q) {
                        err(format!("{p}.{key}"), "outside the mission bounds".into());
                    }
                }
            }
            if let Some(a) = &u.availability {
                if self.start_time.is_none() {
                    err(format!("{p}.availability"), "requires the mission startTime".into());
                }
                if !time_ok(a) {
                    err(format!("{p}.availability"), "start must precede end".into());
                }
            }
            if u.sensors.is_empty() {
                err(format!("{p}.sensors"), "at least one sensor is required".into());
            }
            let mut uniq = HashSet::new();
            for (j, s) in u.sensors.iter().enumerate() {
                if !catalog.has_sensor(s) {
                    err(format!("{p}.sensors[{j}]"), format!("unknown sensor {s:?}"));
                } else if !uniq.insert(s) {
                    err(format!("{p}.sensors[{j}]"), format!("sensor {s:?} listed twice"));
                }
            }
        }

        for (i, g) in self.gcss.iter().enumerate() {
            let p = format!("gcss[{i}]");
            if !inside(&g.position) {
                err(format!("{p}.position"), "outside the mission bounds".into());
            }
            if !(g.range_m > 0.0) || !g.range_m.is_finite() {
                err(format!("{p}.rangeNm"), "must be positive".into());
            }
            if g.max_vehicles < 1 {
                err(format!("{p}.maxVehicles"), "must be at least 1".into());
            }
            for t in &g.controllable_types {
                if catalog.vehicle_type(t).is_none() {
                    err(format!("{p}.controllableTypes"), format!("unknown vehicle type {t:?}"));
                }
            }
        }

        for (i, o) in self.objectives.iter().enumerate() {
            let p = format!("objectives[{i}]");
            if catalog.objective_type(&o.otype).is_none() {
                err(format!("{p}.type"), format!("unknown objective type {:?}", o.otype));
            }
            for q in o.geometry.points() {
                if !inside(&q) {
                    err(format!("{p}.geometry"), "point outside the mission bounds".into());
                    break;
                }
            }
            if let ObjectiveGeometry::Path { points } = &o.geometry {
                if points.len() < 2 {
                    err(format!("{p}.geometry.points"), "a path needs at least 2 points".into());
                }
                if points.windows(2).any(|w| w[0].same_place(&w[1])) {
                    err(format!("{p}.geometry.points"), "consecutive points must differ".into());
                }
            }
            if let Some(d) = o.duration_s {
                if matches!(o.geometry, ObjectiveGeometry::Path { .. }) {
                    err(format!("{p}.durationS"), "only zone and point objectives take a duration".into());
                }
                if !(d > 0.0) || !d.is_finite() {
                    err(format!("{p}.durationS"), "must be positive".into());
                }
            }
            if let Some(tw) = &o.time_window {
                if self.start_time.is_none() {
                    err(format!("{p}.timeWindow"), "requires the mission startTime".into());
                }
                if !time_ok(tw) {
                    err(format!("{p}.timeWindow"), "start must precede end".into());
                }
            }
        }

        for (i, z) in self.nfzs.iter().enumerate() {
            if z.zone.vertices().iter().any(|v| !inside(v)) {
                err(format!("nfzs[{i}].vertices"), "vertex outside the mission bounds".into());
            }
        }

        let objective_names: HashSet<&str> = self.objectives.iter().map(|o| o.name.as_str()).collect();
        for (i, d) in self.dependencies.iter().enumerate() {
            let p = format!("dependencies[{i}]");
            for (key, name) in [("first", &d.first), ("second", &d.second)] {
                if !objective_names.contains(name.as_str()) {
                    err(format!("{p}.{key}"), format!("no objective named {name:?}"));
                }
            }
            if d.first == d.second {
                err(format!("{p}.second"), "an objective cannot depend on itself".into());
            }
            if !(d.offset_s >= 0.0) || !d.offset_s.is_finite() {
                err(format!("{p}.offsetS"), "must be a non-negative number".into());
            } else if d.offset_s > 0.0 && !d.relation.takes_offset() {
                err(
                    format!("{p}.offsetS"),
                    format!("relation {} pins endpoints together and takes no offset", d.relation.as_str()),
                );
            }
        }

        let pr = &self.profile;
        let pp = "operatorProfile";
        for (lo, hi, lk, hk) in [
            (pr.ground_min_m, pr.ground_risked_m, "groundMinM", "groundRiskedM"),
            (pr.fuel_risked_pct, pr.fuel_max_pct, "fuelRiskedPct", "fuelMaxPct"),
            (pr.sep_min_m, pr.sep_risked_m, "sepMinM", "sepRiskedM"),
            (pr.coverage_min_s, pr.coverage_max_s, "coverageMinS", "coverageMaxS"),
        ] {
            if !lo.is_finite() || !hi.is_finite() || lo < 0.0 {
                err(format!("{pp}.{lk}"), "must be a non-negative number".into());
            } else if lo >= hi {
                err(format!("{pp}.{hk}"), format!("must exceed {lk}"));
            }
        }
        if pr.fuel_max_pct > 100.0 {
            err(format!("{pp}.fuelMaxPct"), "must not exceed 100".into());
        }
        for v in RankingVariable::ALL {
            if !pr.importance.contains_key(&v) {
                err(format!("{pp}.importance.{}", v.as_str()), "missing".into());
            }
        }
        for (key, cap) in [
            ("makespanS", pr.caps.makespan_s),
            ("cost", pr.caps.cost),
            ("flightTimeS", pr.caps.flight_time_s),
            ("fuelKg", pr.caps.fuel_kg),
            ("distanceM", pr.caps.distance_m),
        ] {
            if let Some(c) = cap {
                if !(c > 0.0) || !c.is_finite() {
                    err(format!("{pp}.caps.{key}"), "must be positive".into());
                }
            }
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}
