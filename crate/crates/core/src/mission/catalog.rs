//! Vehicle types, sensors and objective types known to the planner.
//!
//! The built-in catalog lives in `data/catalog.json`. Objective types list the
//! tasks they expand into, the sensors able to perform each task and any
//! ordering between those tasks.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{AllenRelation, MissionError, UavRelation};
use crate::geo::{FEET_TO_M, KNOT_TO_MPS, NM_TO_M};

const BUILTIN: &str = include_str!("../../data/catalog.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    MinConsumption,
    MaxSpeed,
    Climb,
    Descent,
}

impl ProfileKind {
    /// Kinds a planner may pick for a cruise leg.
    pub const CRUISE: [ProfileKind; 2] = [ProfileKind::MinConsumption, ProfileKind::MaxSpeed];

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::MinConsumption => "min_consumption",
            ProfileKind::MaxSpeed => "max_speed",
            ProfileKind::Climb => "climb",
            ProfileKind::Descent => "descent",
        }
    }
}

/// Operating regime of a vehicle, in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightProfile {
    pub kind: ProfileKind,
    pub speed_mps: f64,
    pub fuel_rate_kg_s: f64,
    /// Cruise altitude (MSL) for cruise kinds.
    pub altitude_m: Option<f64>,
    /// Climb or descent angle for the ramp kinds.
    pub angle_deg: Option<f64>,
}

impl FlightProfile {
    pub fn fuel_rate_kg_h(&self) -> f64 {
        self.fuel_rate_kg_s * 3600.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightProfiles {
    pub min_consumption: FlightProfile,
    pub max_speed: FlightProfile,
    pub climb: FlightProfile,
    pub descent: FlightProfile,
}

impl FlightProfiles {
    pub fn get(&self, kind: ProfileKind) -> &FlightProfile {
        match kind {
            ProfileKind::MinConsumption => &self.min_consumption,
            ProfileKind::MaxSpeed => &self.max_speed,
            ProfileKind::Climb => &self.climb,
            ProfileKind::Descent => &self.descent,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &FlightProfile> {
        [&self.min_consumption, &self.max_speed, &self.climb, &self.descent].into_iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleType {
    pub name: String,
    pub mass_kg: f64,
    pub max_fuel_kg: f64,
    pub cost_per_hour: f64,
    pub max_altitude_m: f64,
    pub max_speed_mps: f64,
    pub max_flight_time_s: f64,
    pub max_range_m: f64,
    pub profiles: FlightProfiles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskTemplate {
    pub name: String,
    /// Any one of these sensors can perform the task.
    pub sensors: Vec<String>,
    pub multi_vehicle: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDependency {
    pub first: usize,
    pub relation: AllenRelation,
    pub second: usize,
    pub uav_relation: UavRelation,
    pub offset_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveType {
    pub name: String,
    pub tasks: Vec<TaskTemplate>,
    pub dependencies: Vec<TaskDependency>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub version: u32,
    pub sensors: Vec<String>,
    pub vehicle_types: BTreeMap<String, VehicleType>,
    pub objective_types: BTreeMap<String, ObjectiveType>,
}

impl Catalog {
    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| Catalog::from_json(BUILTIN).expect("built-in catalog is valid"))
    }

    pub fn from_json(text: &str) -> Result<Self, MissionError> {
        let raw: RawCatalog = serde_json::from_str(text).map_err(|e| MissionError::Json(e.to_string()))?;
        raw.into_catalog()
    }

    pub fn vehicle_type(&self, name: &str) -> Option<&VehicleType> {
        self.vehicle_types.get(name)
    }

    pub fn objective_type(&self, name: &str) -> Option<&ObjectiveType> {
        self.objective_types.get(name)
    }

    pub fn has_sensor(&self, id: &str) -> bool {
        self.sensors.iter().any(|s| s == id)
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawCatalog {
    version: u32,
    sensors: Vec<String>,
    vehicle_types: Vec<RawVehicleType>,
    objective_types: Vec<RawObjectiveType>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawVehicleType {
    name: String,
    mass_kg: f64,
    max_fuel_kg: f64,
    cost_per_hour: f64,
    max_altitude_ft: f64,
    max_speed_kn: f64,
    max_flight_time_h: f64,
    max_range_nm: f64,
    profiles: RawProfiles,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawProfiles {
    min_consumption: RawProfile,
    max_speed: RawProfile,
    climb: RawProfile,
    descent: RawProfile,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawProfile {
    speed_kn: f64,
    fuel_rate_kg_h: f64,
    #[serde(default)]
    altitude_ft: Option<f64>,
    #[serde(default)]
    angle_deg: Option<f64>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawObjectiveType {
    name: String,
    tasks: Vec<RawTask>,
    #[serde(default)]
    dependencies: Vec<RawTaskDependency>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawTask {
    name: String,
    sensors: Vec<String>,
    multi_vehicle: bool,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawTaskDependency {
    first: usize,
    relation: AllenRelation,
    second: usize,
    uav_relation: UavRelation,
    offset_s: f64,
}

impl RawProfile {
    fn convert(&self, kind: ProfileKind, vt: &str) -> Result<FlightProfile, MissionError> {
        let bad = |m: &str| MissionError::Catalog(format!("{vt} {}: {m}", kind.as_str()));
        if !(self.speed_kn > 0.0) || !(self.fuel_rate_kg_h > 0.0) {
            return Err(bad("speed and fuel rate must be positive"));
        }
        let ramp = matches!(kind, ProfileKind::Climb | ProfileKind::Descent);
        match (ramp, self.altitude_ft, self.angle_deg) {
            (true, None, Some(a)) if a > 0.0 && a < 90.0 => {}
            (false, Some(alt), None) if alt > 0.0 => {}
            _ => return Err(bad("climb/descent need only an angle in (0, 90), cruise kinds only a positive altitude")),
        }
        Ok(FlightProfile {
            kind,
            speed_mps: self.speed_kn * KNOT_TO_MPS,
            fuel_rate_kg_s: self.fuel_rate_kg_h / 3600.0,
            altitude_m: self.altitude_ft.map(|ft| ft * FEET_TO_M),
            angle_deg: self.angle_deg,
        })
    }
}

impl RawCatalog {
    fn into_catalog(self) -> Result<Catalog, MissionError> {
        let mut vehicle_types = BTreeMap::new();
        for v in self.vehicle_types {
            let positive = [
                v.mass_kg,
                v.max_fuel_kg,
                v.cost_per_hour,
                v.max_altitude_ft,
                v.max_speed_kn,
                v.max_flight_time_h,
                v.max_range_nm,
            ];
            if positive.iter().any(|x| !(*x > 0.0)) {
                return Err(MissionError::Catalog(format!("{}: vehicle parameters must be positive", v.name)));
            }
            let profiles = FlightProfiles {
                min_consumption: v.profiles.min_consumption.convert(ProfileKind::MinConsumption, &v.name)?,
                max_speed: v.profiles.max_speed.convert(ProfileKind::MaxSpeed, &v.name)?,
                climb: v.profiles.climb.convert(ProfileKind::Climb, &v.name)?,
                descent: v.profiles.descent.convert(ProfileKind::Descent, &v.name)?,
            };
            let vt = VehicleType {
                name: v.name.clone(),
                mass_kg: v.mass_kg,
                max_fuel_kg: v.max_fuel_kg,
                cost_per_hour: v.cost_per_hour,
                max_altitude_m: v.max_altitude_ft * FEET_TO_M,
                max_speed_mps: v.max_speed_kn * KNOT_TO_MPS,
                max_flight_time_s: v.max_flight_time_h * 3600.0,
                max_range_m: v.max_range_nm * NM_TO_M,
                profiles,
            };
            for p in vt.profiles.iter() {
                if p.speed_mps > vt.max_speed_mps + 1e-9 {
                    return Err(MissionError::Catalog(format!(
                        "{}: {} speed exceeds the type's maximum",
                        vt.name,
                        p.kind.as_str()
                    )));
                }
                if p.altitude_m.is_some_and(|a| a > vt.max_altitude_m + 1e-9) {
                    return Err(MissionError::Catalog(format!(
                        "{}: {} altitude exceeds the type's maximum",
                        vt.name,
                        p.kind.as_str()
                    )));
                }
            }
            if vehicle_types.insert(v.name.clone(), vt).is_some() {
                return Err(MissionError::Catalog(format!("duplicate vehicle type {}", v.name)));
            }
        }

        let mut objective_types = BTreeMap::new();
        for o in self.objective_types {
            if o.tasks.is_empty() {
                return Err(MissionError::Catalog(format!("{}: no tasks", o.name)));
            }
            let tasks: Vec<TaskTemplate> = o
                .tasks
                .into_iter()
                .map(|t| TaskTemplate { name: t.name, sensors: t.sensors, multi_vehicle: t.multi_vehicle })
                .collect();
            for t in &tasks {
                if t.sensors.is_empty() || t.sensors.iter().any(|s| !self.sensors.contains(s)) {
                    return Err(MissionError::Catalog(format!(
                        "{}/{}: sensors must be non-empty and from the vocabulary",
                        o.name, t.name
                    )));
                }
            }
            let dependencies = o
                .dependencies
                .into_iter()
                .map(|d| {
                    if d.first >= tasks.len() || d.second >= tasks.len() || d.first == d.second {
                        return Err(MissionError::Catalog(format!("{}: dependency task indices invalid", o.name)));
                    }
                    Ok(TaskDependency {
                        first: d.first,
                        relation: d.relation,
                        second: d.second,
                        uav_relation: d.uav_relation,
                        offset_s: d.offset_s,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let ot = ObjectiveType { name: o.name.clone(), tasks, dependencies };
            if objective_types.insert(o.name.clone(), ot).is_some() {
                return Err(MissionError::Catalog(format!("duplicate objective type {}", o.name)));
            }
        }

        Ok(Catalog { version: self.version, sensors: self.sensors, vehicle_types, objective_types })
    }
}
