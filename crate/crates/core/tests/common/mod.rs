#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use serde_json::{json, Value};
use skyplan_core::geo::{ArcSeconds, ElevationGrid, GridBounds};
use skyplan_core::mission::{parse_mission, Mission};
use skyplan_core::plan::PlanContext;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn usecase1() -> Mission {
    parse_mission(&fixture_text("usecase1.json")).unwrap()
}

pub fn usecase1_grid() -> Arc<ElevationGrid> {
    Arc::new(fixture_text("usecase1.egrid").parse().unwrap())
}

pub fn usecase1_ctx() -> PlanContext {
    PlanContext::new(usecase1(), usecase1_grid()).unwrap()
}

pub const BOUNDS: [f64; 4] = [36.76, -2.396, 36.85, -2.174];

pub fn flat_grid(height: f64) -> Arc<ElevationGrid> {
    let [a, b, c, d] = BOUNDS;
    Arc::new(ElevationGrid::flat(GridBounds::new(a, b, c, d), ArcSeconds::S7_5, height).unwrap())
}

pub fn profile() -> Value {
    json!({
        "groundMinM": 100, "groundRiskedM": 300,
        "fuelMaxPct": 90, "fuelRiskedPct": 50,
        "sepMinM": 150, "sepRiskedM": 1000,
        "coverageMinS": 0, "coverageMaxS": 300,
        "importance": {
            "makespan": "medium", "cost": "medium", "fuel": "medium", "flightTime": "medium",
            "distance": "medium", "fuelRisk": "medium", "groundRisk": "medium",
            "coverageRisk": "medium", "closenessRisk": "medium", "uavs": "medium",
            "tasks": "medium", "gcss": "medium"
        }
    })
}

pub fn urav(name: &str, lat: f64, lon: f64) -> Value {
    json!({ "name": name, "type": "URAV", "fuel": 35, "position": { "lat": lat, "lon": lon }, "sensors": ["EO/IR"] })
}

pub fn photo(name: &str, lat: f64, lon: f64) -> Value {
    json!({
        "name": name, "type": "target_photographing",
        "geometry": { "kind": "point", "position": { "lat": lat, "lon": lon } },
        "durationS": 60, "mandatory": false
    })
}

pub fn gcs() -> Value {
    json!({
        "name": "G", "position": { "lat": 36.80, "lon": -2.30 }, "rangeNm": 15,
        "maxVehicles": 4, "controllableTypes": ["HALE", "MALE", "URAV"]
    })
}

/// Small mission over the use-case area; `extra` is merged at top level.
pub fn mission(uavs: Vec<Value>, objectives: Vec<Value>, extra: Value) -> Mission {
    let [a, b, c, d] = BOUNDS;
    let mut v = json!({
        "missionSchema": 1, "name": "t",
        "bounds": { "lat0": a, "lon0": b, "lat1": c, "lon1": d },
        "arcSeconds": 7.5,
        "uavs": uavs, "gcss": [gcs()], "objectives": objectives,
        "operatorProfile": profile()
    });
    if let Value::Object(m) = extra {
        for (k, x) in m {
            v[k] = x;
        }
    }
    parse_mission(&v.to_string()).unwrap()
}
