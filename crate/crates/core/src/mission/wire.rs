//! JSON wire format for missions.
//!
//! Keys are camelCase, lengths are feet and nautical miles, times are
//! RFC 3339 strings. Unit-converted quantities are quantised to 1e-6 of their
//! wire unit on the way in, which makes `parse(serialize(m)) == m` exact.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, SecondsFormat, SubsecRound, Utc};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    AllenRelation, Caps, Dependency, Gcs, Importance, Mission, MissionError, Nfz, Objective, ObjectiveGeometry,
    OperatorProfile, RankingVariable, TimeWindow, Uav, UavRelation, ValidationError,
};
use crate::geo::{ArcSeconds, GeoPoint, GridBounds, PolygonZone, FEET_TO_M, NM_TO_M};

pub const MISSION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WireMission {
    mission_schema: u32,
    name: String,
    bounds: WireBounds,
    arc_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start_time: Option<String>,
    #[serde(default)]
    uavs: Vec<WireUav>,
    #[serde(default)]
    gcss: Vec<WireGcs>,
    #[serde(default)]
    objectives: Vec<WireObjective>,
    #[serde(default)]
    nfzs: Vec<WireNfz>,
    #[serde(default)]
    dependencies: Vec<WireDependency>,
    operator_profile: WireProfile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireBounds {
    lat0: f64,
    lon0: f64,
    lat1: f64,
    lon1: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WirePoint {
    lat: f64,
    lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alt_ft: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireWindow {
    start: String,
    end: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WireUav {
    name: String,
    #[serde(rename = "type")]
    vtype: String,
    fuel: f64,
    position: WirePoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    departure_runway_end: Option<WirePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    landing_track_start: Option<WirePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end_position: Option<WirePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    availability: Option<WireWindow>,
    sensors: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WireGcs {
    name: String,
    position: WirePoint,
    range_nm: f64,
    max_vehicles: u32,
    controllable_types: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WireGeometry {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<WirePoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<WirePoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    position: Option<WirePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entry: Option<WirePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exit: Option<WirePoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WireObjective {
    name: String,
    #[serde(rename = "type")]
    otype: String,
    geometry: WireGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_window: Option<WireWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration_s: Option<f64>,
    #[serde(default)]
    mandatory: bool,
    #[serde(default)]
    requires_los: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireNfz {
    #[serde(default)]
    name: Option<String>,
    vertices: Vec<WirePoint>,
}

fn undefined() -> UavRelation {
    UavRelation::Undefined
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WireDependency {
    first: String,
    relation: AllenRelation,
    second: String,
    #[serde(default = "undefined")]
    uav_relation: UavRelation,
    #[serde(default)]
    offset_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WireProfile {
    #[serde(default)]
    all_tasks_mandatory: bool,
    ground_min_m: f64,
    ground_risked_m: f64,
    fuel_max_pct: f64,
    fuel_risked_pct: f64,
    sep_min_m: f64,
    sep_risked_m: f64,
    coverage_min_s: f64,
    coverage_max_s: f64,
    importance: BTreeMap<RankingVariable, Importance>,
    #[serde(default)]
    caps: WireCaps,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WireCaps {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    makespan_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flight_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fuel_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distance_m: Option<f64>,
}

fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn from_wire_len(x: f64, unit: f64) -> f64 {
    quantize(x) * unit
}

fn to_wire_len(x: f64, unit: f64) -> f64 {
    quantize(x / unit)
}

fn decode<T: DeserializeOwned>(text: &str) -> Result<T, MissionError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => {
                MissionError::Validation(vec![ValidationError::new(path, inner.to_string())])
            }
            _ => MissionError::Json(inner.to_string()),
        }
    })
}

/// Collects conversion errors while turning wire values into domain values.
struct Conv {
    start: Option<DateTime<Utc>>,
    errs: Vec<ValidationError>,
}

impl Conv {
    fn err(&mut self, path: impl Into<String>, msg: impl Into<String>) {
        self.errs.push(ValidationError::new(path, msg));
    }

    fn point(&self, p: &WirePoint) -> GeoPoint {
        GeoPoint { lat: p.lat, lon: p.lon, alt: p.alt_ft.map(|ft| from_wire_len(ft, FEET_TO_M)) }
    }

    fn time(&mut self, path: &str, s: &str) -> Option<f64> {
        match DateTime::parse_from_rfc3339(s) {
            Ok(t) => {
                let t = t.with_timezone(&Utc);
                // without a start time the caller reports the real problem
                let start = self.start?;
                Some((t - start).num_milliseconds() as f64 / 1000.0)
            }
            Err(e) => {
                self.err(path, format!("not an RFC 3339 timestamp: {e}"));
                None
            }
        }
    }

    fn window(&mut self, path: &str, w: &Option<WireWindow>) -> Option<TimeWindow> {
        let w = w.as_ref()?;
        if self.start.is_none() {
            self.err(path, "requires the mission startTime");
            return None;
        }
        let s = self.time(&format!("{path}.start"), &w.start);
        let e = self.time(&format!("{path}.end"), &w.end);
        Some(TimeWindow::new(s?, e?))
    }

    fn zone(&mut self, path: &str, vs: &[WirePoint]) -> Option<PolygonZone> {
        match PolygonZone::new(vs.iter().map(|p| self.point(p)).collect()) {
            Ok(z) => Some(z),
            Err(e) => {
                self.err(path, e.to_string());
                None
            }
        }
    }

    fn uav(&mut self, i: usize, u: &WireUav) -> Uav {
        let p = format!("uavs[{i}]");
        Uav {
            name: u.name.clone(),
            vtype: u.vtype.clone(),
            fuel_kg: u.fuel,
            position: self.point(&u.position),
            departure_runway_end: u.departure_runway_end.as_ref().map(|q| self.point(q)),
            landing_track_start: u.landing_track_start.as_ref().map(|q| self.point(q)),
            end_position: u.end_position.as_ref().map(|q| self.point(q)),
            availability: self.window(&format!("{p}.availability"), &u.availability),
            sensors: u.sensors.clone(),
        }
    }

    fn objective(&mut self, path: &str, o: &WireObjective) -> Option<Objective> {
        let g = &o.geometry;
        let gp = format!("{path}.geometry");
        let stray = |field: &str, present: bool, conv: &mut Conv| {
            if present {
                conv.err(format!("{gp}.{field}"), format!("not allowed for {} geometry", g.kind));
            }
        };
        let geometry = match g.kind.as_str() {
            "zone" => {
                stray("points", g.points.is_some(), self);
                stray("position", g.position.is_some(), self);
                let Some(vs) = &g.vertices else {
                    self.err(format!("{gp}.vertices"), "required for zone geometry");
                    return None;
                };
                let zone = self.zone(&format!("{gp}.vertices"), vs)?;
                ObjectiveGeometry::Zone {
                    zone,
                    entry: g.entry.as_ref().map(|q| self.point(q)),
                    exit: g.exit.as_ref().map(|q| self.point(q)),
                }
            }
            "path" => {
                for (f, present) in [
                    ("vertices", g.vertices.is_some()),
                    ("position", g.position.is_some()),
                    ("entry", g.entry.is_some()),
                    ("exit", g.exit.is_some()),
                ] {
                    stray(f, present, self);
                }
                let Some(ps) = &g.points else {
                    self.err(format!("{gp}.points"), "required for path geometry");
                    return None;
                };
                ObjectiveGeometry::Path { points: ps.iter().map(|q| self.point(q)).collect() }
            }
            "point" => {
                for (f, present) in [
                    ("vertices", g.vertices.is_some()),
                    ("points", g.points.is_some()),
                    ("entry", g.entry.is_some()),
                    ("exit", g.exit.is_some()),
                ] {
                    stray(f, present, self);
                }
                let Some(q) = &g.position else {
                    self.err(format!("{gp}.position"), "required for point geometry");
                    return None;
                };
                ObjectiveGeometry::Point { position: self.point(q) }
            }
            other => {
                self.err(format!("{gp}.kind"), format!("expected zone, path or point, got {other:?}"));
                return None;
            }
        };
        Some(Objective {
            name: o.name.clone(),
            otype: o.otype.clone(),
            geometry,
            time_window: self.window(&format!("{path}.timeWindow"), &o.time_window),
            duration_s: o.duration_s,
            mandatory: o.mandatory,
            requires_los: o.requires_los,
        })
    }
}

fn to_wire_point(p: &GeoPoint) -> WirePoint {
    WirePoint { lat: p.lat, lon: p.lon, alt_ft: p.alt.map(|m| to_wire_len(m, FEET_TO_M)) }
}

fn format_time(start: Option<DateTime<Utc>>, secs: f64) -> String {
    // windows only exist when a start time does
    let start = start.unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
    let t = start + Duration::milliseconds((secs * 1000.0).round() as i64);
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn to_wire_window(start: Option<DateTime<Utc>>, w: &Option<TimeWindow>) -> Option<WireWindow> {
    w.map(|w| WireWindow { start: format_time(start, w.start), end: format_time(start, w.end) })
}

fn to_wire_objective(start: Option<DateTime<Utc>>, o: &Objective) -> WireObjective {
    let pts = |v: &[GeoPoint]| Some(v.iter().map(to_wire_point).collect());
    let geometry = match &o.geometry {
        ObjectiveGeometry::Zone { zone, entry, exit } => WireGeometry {
            kind: "zone".into(),
            vertices: pts(zone.vertices()),
            points: None,
            position: None,
            entry: entry.as_ref().map(to_wire_point),
            exit: exit.as_ref().map(to_wire_point),
        },
        ObjectiveGeometry::Path { points } => WireGeometry {
            kind: "path".into(),
            vertices: None,
            points: pts(points),
            position: None,
            entry: None,
            exit: None,
        },
        ObjectiveGeometry::Point { position } => WireGeometry {
            kind: "point".into(),
            vertices: None,
            points: None,
            position: Some(to_wire_point(position)),
            entry: None,
            exit: None,
        },
    };
    WireObjective {
        name: o.name.clone(),
        otype: o.otype.clone(),
        geometry,
        time_window: to_wire_window(start, &o.time_window),
        duration_s: o.duration_s,
        mandatory: o.mandatory,
        requires_los: o.requires_los,
    }
}

/// Parses and validates a mission document.
pub fn parse_mission(text: &str) -> Result<Mission, MissionError> {
    let w: WireMission = decode(text)?;
    let mut conv = Conv { start: None, errs: Vec::new() };
    if w.mission_schema != MISSION_SCHEMA_VERSION {
        conv.err(
            "missionSchema",
            format!("unsupported version {}, expected {MISSION_SCHEMA_VERSION}", w.mission_schema),
        );
    }
    let arc = ArcSeconds::from_seconds(w.arc_seconds);
    if arc.is_none() {
        conv.err("arcSeconds", format!("must be 30, 15 or 7.5, got {}", w.arc_seconds));
    }
    if let Some(s) = &w.start_time {
        match DateTime::parse_from_rfc3339(s) {
            Ok(t) => conv.start = Some(t.with_timezone(&Utc).trunc_subsecs(3)),
            Err(e) => conv.err("startTime", format!("not an RFC 3339 timestamp: {e}")),
        }
    }

    let uavs: Vec<Uav> = w.uavs.iter().enumerate().map(|(i, u)| conv.uav(i, u)).collect();
    let gcss: Vec<Gcs> = w
        .gcss
        .iter()
        .map(|g| Gcs {
            name: g.name.clone(),
            position: conv.point(&g.position),
            range_m: from_wire_len(g.range_nm, NM_TO_M),
            max_vehicles: g.max_vehicles,
            controllable_types: g.controllable_types.iter().cloned().collect::<BTreeSet<_>>(),
        })
        .collect();
    let objectives: Vec<Option<Objective>> =
        w.objectives.iter().enumerate().map(|(i, o)| conv.objective(&format!("objectives[{i}]"), o)).collect();
    let nfzs: Vec<Option<Nfz>> = w
        .nfzs
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let zone = conv.zone(&format!("nfzs[{i}].vertices"), &z.vertices)?;
            Some(Nfz { name: z.name.clone().unwrap_or_else(|| format!("nfz-{i}")), zone })
        })
        .collect();
    let dependencies = w
        .dependencies
        .iter()
        .map(|d| Dependency {
            first: d.first.clone(),
            relation: d.relation,
            second: d.second.clone(),
            uav_relation: d.uav_relation,
            offset_s: d.offset_s,
        })
        .collect();
    let p = &w.operator_profile;
    let profile = OperatorProfile {
        all_tasks_mandatory: p.all_tasks_mandatory,
        ground_min_m: p.ground_min_m,
        ground_risked_m: p.ground_risked_m,
        fuel_max_pct: p.fuel_max_pct,
        fuel_risked_pct: p.fuel_risked_pct,
        sep_min_m: p.sep_min_m,
        sep_risked_m: p.sep_risked_m,
        coverage_min_s: p.coverage_min_s,
        coverage_max_s: p.coverage_max_s,
        importance: p.importance.clone(),
        caps: Caps {
            makespan_s: p.caps.makespan_s,
            cost: p.caps.cost,
            flight_time_s: p.caps.flight_time_s,
            fuel_kg: p.caps.fuel_kg,
            distance_m: p.caps.distance_m,
        },
    };

    if !conv.errs.is_empty() {
        return Err(MissionError::Validation(conv.errs));
    }
    let m = Mission {
        name: w.name,
        bounds: GridBounds::new(w.bounds.lat0, w.bounds.lon0, w.bounds.lat1, w.bounds.lon1),
        arc_seconds: arc.expect("checked above"),
        start_time: conv.start,
        uavs,
        gcss,
        objectives: objectives.into_iter().map(|o| o.expect("checked above")).collect(),
        nfzs: nfzs.into_iter().map(|z| z.expect("checked above")).collect(),
        dependencies,
        profile,
    };
    m.validate().map_err(MissionError::Validation)?;
    Ok(m)
}

/// Parses a single objective in the wire format of `objectives[]` against
/// an existing mission's clock. The result is not yet checked against the
/// mission; see [`Mission::with_objective`].
pub fn parse_objective(text: &str, m: &Mission) -> Result<Objective, MissionError> {
    let w: WireObjective = decode(text)?;
    let mut conv = Conv { start: m.start_time, errs: Vec::new() };
    let o = conv.objective("objective", &w);
    match o {
        Some(o) if conv.errs.is_empty() => Ok(o),
        _ => Err(MissionError::Validation(conv.errs)),
    }
}

/// Serialises a mission with keys sorted at every level.
pub fn serialize_mission(m: &Mission) -> String {
    let start = m.start_time;
    let w = WireMission {
        mission_schema: MISSION_SCHEMA_VERSION,
        name: m.name.clone(),
        bounds: WireBounds { lat0: m.bounds.lat0, lon0: m.bounds.lon0, lat1: m.bounds.lat1, lon1: m.bounds.lon1 },
        arc_seconds: m.arc_seconds.seconds(),
        start_time: start.map(|t| t.to_rfc3339_opts(SecondsFormat::Millis, true)),
        uavs: m
            .uavs
            .iter()
            .map(|u| WireUav {
                name: u.name.clone(),
                vtype: u.vtype.clone(),
                fuel: u.fuel_kg,
                position: to_wire_point(&u.position),
                departure_runway_end: u.departure_runway_end.as_ref().map(to_wire_point),
                landing_track_start: u.landing_track_start.as_ref().map(to_wire_point),
                end_position: u.end_position.as_ref().map(to_wire_point),
                availability: to_wire_window(start, &u.availability),
                sensors: u.sensors.clone(),
            })
            .collect(),
        gcss: m
            .gcss
            .iter()
            .map(|g| WireGcs {
                name: g.name.clone(),
                position: to_wire_point(&g.position),
                range_nm: to_wire_len(g.range_m, NM_TO_M),
                max_vehicles: g.max_vehicles,
                controllable_types: g.controllable_types.iter().cloned().collect(),
            })
            .collect(),
        objectives: m.objectives.iter().map(|o| to_wire_objective(start, o)).collect(),
        nfzs: m
            .nfzs
            .iter()
            .map(|z| WireNfz {
                name: Some(z.name.clone()),
                vertices: z.zone.vertices().iter().map(to_wire_point).collect(),
            })
            .collect(),
        dependencies: m
            .dependencies
            .iter()
            .map(|d| WireDependency {
                first: d.first.clone(),
                relation: d.relation,
                second: d.second.clone(),
                uav_relation: d.uav_relation,
                offset_s: d.offset_s,
            })
            .collect(),
        operator_profile: {
            let p = &m.profile;
            WireProfile {
                all_tasks_mandatory: p.all_tasks_mandatory,
                ground_min_m: p.ground_min_m,
                ground_risked_m: p.ground_risked_m,
                fuel_max_pct: p.fuel_max_pct,
                fuel_risked_pct: p.fuel_risked_pct,
                sep_min_m: p.sep_min_m,
                sep_risked_m: p.sep_risked_m,
                coverage_min_s: p.coverage_min_s,
                coverage_max_s: p.coverage_max_s,
                importance: p.importance.clone(),
                caps: WireCaps {
                    makespan_s: p.caps.makespan_s,
                    cost: p.caps.cost,
                    flight_time_s: p.caps.flight_time_s,
                    fuel_kg: p.caps.fuel_kg,
                    distance_m: p.caps.distance_m,
                },
            }
        },
    };
    let v = serde_json::to_value(&w).expect("wire mission serialises");
    let mut out = serde_json::to_string_pretty(&canonical_json(v)).expect("value serialises");
    out.push('\n');
    out
}

/// Rebuilds `v` with object keys in sorted order, whatever map type
/// serde_json was compiled with.
pub fn canonical_json(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, canonical_json(v));
            }
            Value::Object(out)
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(canonical_json).collect()),
        other => other,
    }
}
