//! Hard-constraint checking of decoded plans and failure statistics.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mission::{AllenRelation, DependencyGroup, UavRelation};
use crate::plan::{EvaluationReport, PlanContext, PlanGenome, Schedule};

/// Tolerance for comparisons between times; strict inequalities need a gap
/// larger than this.
pub const EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonCode {
    Dependency,
    TimeWindow,
    FuelCapacity,
    FlightTime,
    Range,
    Altitude,
    Speed,
    GcsCapacity,
    GcsType,
    CoverageTime,
    Los,
    Availability,
    CapMakespan,
    CapCost,
    CapFlightTime,
    CapFuel,
    CapDistance,
}

impl ReasonCode {
    pub const ALL: [ReasonCode; 17] = [
        ReasonCode::Dependency,
        ReasonCode::TimeWindow,
        ReasonCode::FuelCapacity,
        ReasonCode::FlightTime,
        ReasonCode::Range,
        ReasonCode::Altitude,
        ReasonCode::Speed,
        ReasonCode::GcsCapacity,
        ReasonCode::GcsType,
        ReasonCode::CoverageTime,
        ReasonCode::Los,
        ReasonCode::Availability,
        ReasonCode::CapMakespan,
        ReasonCode::CapCost,
        ReasonCode::CapFlightTime,
        ReasonCode::CapFuel,
        ReasonCode::CapDistance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReasonCode::Dependency => "dependency",
            ReasonCode::TimeWindow => "time_window",
            ReasonCode::FuelCapacity => "fuel_capacity",
            ReasonCode::FlightTime => "flight_time",
            ReasonCode::Range => "range",
            ReasonCode::Altitude => "altitude",
            ReasonCode::Speed => "speed",
            ReasonCode::GcsCapacity => "gcs_capacity",
            ReasonCode::GcsType => "gcs_type",
            ReasonCode::CoverageTime => "coverage_time",
            ReasonCode::Los => "los",
            ReasonCode::Availability => "availability",
            ReasonCode::CapMakespan => "cap_makespan",
            ReasonCode::CapCost => "cap_cost",
            ReasonCode::CapFlightTime => "cap_flight_time",
            ReasonCode::CapFuel => "cap_fuel",
            ReasonCode::CapDistance => "cap_distance",
        }
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub reason: ReasonCode,
    pub subject: String,
    pub measured: f64,
    pub limit: f64,
}

impl Violation {
    fn new(reason: ReasonCode, subject: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self { reason, subject: subject.into(), measured, limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self { valid: violations.is_empty(), violations }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    S1,
    E1,
    S2,
    E2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Lt,
    Eq,
}

/// `lhs + offset  cmp  rhs`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inequality {
    pub lhs: Endpoint,
    pub offset: f64,
    pub cmp: Cmp,
    pub rhs: Endpoint,
}

impl Inequality {
    /// How far the inequality is from holding; 0 when it holds.
    pub fn residual(&self, i1: (f64, f64), i2: (f64, f64)) -> f64 {
        let v = |e: Endpoint| match e {
            Endpoint::S1 => i1.0,
            Endpoint::E1 => i1.1,
            Endpoint::S2 => i2.0,
            Endpoint::E2 => i2.1,
        };
        let a = v(self.lhs) + self.offset;
        let b = v(self.rhs);
        match self.cmp {
            Cmp::Le if a <= b + EPS => 0.0,
            Cmp::Lt if b - a > EPS => 0.0,
            Cmp::Eq if (a - b).abs() <= EPS => 0.0,
            Cmp::Eq => (a - b).abs(),
            Cmp::Le | Cmp::Lt => a - b + EPS,
        }
    }
}

/// An Allen relation between the intervals of two task groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllenConstraint {
    pub relation: AllenRelation,
    pub offset_s: f64,
}

impl AllenConstraint {
    pub fn new(relation: AllenRelation, offset_s: f64) -> Self {
        Self { relation, offset_s }
    }

    /// Linear form over the endpoints `s1, e1` (first) and `s2, e2`
    /// (second). The offset enters the first inequality only.
    pub fn compile(&self) -> Vec<Inequality> {
        use Cmp::*;
        use Endpoint::*;
        let o = self.offset_s;
        let q = |lhs, offset, cmp, rhs| Inequality { lhs, offset, cmp, rhs };
        match self.relation {
            AllenRelation::Before => vec![q(E1, o, Le, S2)],
            AllenRelation::Meets => vec![q(E1, o, Eq, S2)],
            AllenRelation::Overlaps => vec![q(S1, o, Lt, S2), q(S2, 0.0, Lt, E1), q(E1, 0.0, Lt, E2)],
            AllenRelation::Starts => vec![q(S1, o, Eq, S2), q(E1, 0.0, Lt, E2)],
            AllenRelation::During => vec![q(S2, o, Lt, S1), q(E1, 0.0, Lt, E2)],
            AllenRelation::Finishes => vec![q(E1, o, Eq, E2), q(S2, 0.0, Lt, S1)],
            AllenRelation::Equals => vec![q(S1, o, Eq, S2), q(E1, 0.0, Eq, E2)],
        }
    }

    /// Largest residual over the compiled inequalities.
    pub fn residual(&self, i1: (f64, f64), i2: (f64, f64)) -> f64 {
        self.compile().iter().map(|q| q.residual(i1, i2)).fold(0.0, f64::max)
    }

    pub fn holds(&self, i1: (f64, f64), i2: (f64, f64)) -> bool {
        self.residual(i1, i2) == 0.0
    }
}

fn union_uavs(group: &[usize], uavs_of: &dyn Fn(usize) -> Vec<usize>) -> Vec<usize> {
    let mut all: Vec<usize> = group.iter().flat_map(|&t| uavs_of(t)).collect();
    all.sort_unstable();
    all.dedup();
    all
}

fn uav_relation_violation(dep: &DependencyGroup, uavs_of: &dyn Fn(usize) -> Vec<usize>) -> Option<Violation> {
    let a = union_uavs(&dep.first, uavs_of);
    let b = union_uavs(&dep.second, uavs_of);
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let bad = match dep.uav_relation {
        UavRelation::Undefined => false,
        UavRelation::Same => a != b,
        UavRelation::Different => a.iter().any(|u| b.contains(u)),
    };
    let shared = a.iter().filter(|u| b.contains(u)).count() as f64;
    bad.then(|| Violation::new(ReasonCode::Dependency, format!("{} (uav relation)", dep.label), shared, 0.0))
}

/// Checks the UAV relation of a dependency against the assignment genes:
/// `same` needs equal UAV sets, `different` disjoint ones.
pub fn uav_relation_check(dep: &DependencyGroup, g: &PlanGenome) -> Option<Violation> {
    uav_relation_violation(dep, &|t| g.assignment[t].uavs().to_vec())
}

/// Evaluates every hard constraint family on a decoded schedule.
pub fn check(ctx: &PlanContext, s: &Schedule, r: &EvaluationReport) -> CheckReport {
    let mut v = Vec::new();
    check_dependencies(ctx, s, &mut v);
    check_windows(ctx, s, &mut v);
    check_vehicles(ctx, s, r, &mut v);
    check_gcss(ctx, s, &mut v);
    check_coverage(ctx, r, &mut v);
    check_caps(ctx, r, &mut v);
    CheckReport::from_violations(v)
}

fn group_interval(s: &Schedule, group: &[usize]) -> Option<(f64, f64)> {
    let recs: Vec<_> = group.iter().filter_map(|&t| s.tasks[t].as_ref()).collect();
    if recs.is_empty() {
        return None;
    }
    Some((
        recs.iter().map(|r| r.start).fold(f64::INFINITY, f64::min),
        recs.iter().map(|r| r.end).fold(f64::NEG_INFINITY, f64::max),
    ))
}

fn check_dependencies(ctx: &PlanContext, s: &Schedule, v: &mut Vec<Violation>) {
    let before = v.len();
    let uavs_of = |t: usize| s.tasks[t].as_ref().map(|r| r.uavs.clone()).unwrap_or_default();
    for d in &ctx.tasks.dependencies {
        if let (Some(i1), Some(i2)) = (group_interval(s, &d.first), group_interval(s, &d.second)) {
            let res = AllenConstraint::new(d.relation, d.offset_s).residual(i1, i2);
            if res > 0.0 {
                v.push(Violation::new(ReasonCode::Dependency, d.label.clone(), res, 0.0));
            }
        }
        v.extend(uav_relation_violation(d, &uavs_of));
    }
    if !s.converged && v.len() == before {
        v.push(Violation::new(
            ReasonCode::Dependency,
            "start times did not settle",
            s.iterations as f64,
            s.iterations as f64,
        ));
    }
}

fn check_windows(ctx: &PlanContext, s: &Schedule, v: &mut Vec<Violation>) {
    for rec in s.tasks.iter().flatten().filter(|r| !r.frozen) {
        let o = &ctx.mission.objectives[ctx.tasks.objective_of[rec.task]];
        let Some(w) = o.time_window else { continue };
        let id = &ctx.tasks.tasks[rec.task].id;
        if rec.start < w.start - EPS {
            v.push(Violation::new(ReasonCode::TimeWindow, id.clone(), rec.start, w.start));
        }
        if rec.end > w.end + EPS {
            v.push(Violation::new(ReasonCode::TimeWindow, id.clone(), rec.end, w.end));
        }
    }
}

fn check_vehicles(ctx: &PlanContext, s: &Schedule, r: &EvaluationReport, v: &mut Vec<Violation>) {
    for (p, perf) in s.uavs.iter().zip(&r.uavs) {
        if !perf.used {
            continue;
        }
        let u = &ctx.mission.uavs[p.uav];
        let vt = &ctx.vtypes[p.uav];
        let name = &u.name;
        let mut over = |reason, measured: f64, limit: f64| {
            if measured > limit + EPS {
                v.push(Violation::new(reason, name.clone(), measured, limit));
            }
        };
        over(ReasonCode::FuelCapacity, perf.fuel_kg, p.start.fuel_kg);
        over(ReasonCode::FlightTime, p.start.elapsed_s + perf.flight_time_s, vt.max_flight_time_s);
        over(ReasonCode::Range, p.start.flown_m + perf.distance_m, vt.max_range_m);
        over(ReasonCode::Altitude, perf.max_altitude_m.unwrap_or(0.0), vt.max_altitude_m);
        over(ReasonCode::Speed, perf.max_speed_mps, vt.max_speed_mps);
        if let (Some(w), Some(dep), Some(land)) = (u.availability, perf.departure, perf.return_time) {
            if !p.start.airborne && dep < w.start - EPS {
                v.push(Violation::new(ReasonCode::Availability, name.clone(), dep, w.start));
            }
            if land > w.end + EPS {
                v.push(Violation::new(ReasonCode::Availability, name.clone(), land, w.end));
            }
        }
    }
}

fn check_gcss(ctx: &PlanContext, s: &Schedule, v: &mut Vec<Violation>) {
    for (k, gcs) in ctx.mission.gcss.iter().enumerate() {
        let mut events = Vec::new();
        for p in s.uavs.iter().filter(|p| p.gcs == Some(k)) {
            let (Some(a), Some(b)) = (p.departure(), p.landing()) else { continue };
            let u = &ctx.mission.uavs[p.uav];
            if !gcs.controllable_types.contains(&u.vtype) {
                v.push(Violation::new(ReasonCode::GcsType, format!("{} -> {}", u.name, gcs.name), 1.0, 0.0));
            }
            events.push((a, 1i32));
            events.push((b, -1i32));
        }
        // landings before take-offs at the same instant
        events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let (mut now, mut peak) = (0i32, 0i32);
        for (_, d) in events {
            now += d;
            peak = peak.max(now);
        }
        if peak as u32 > gcs.max_vehicles {
            v.push(Violation::new(ReasonCode::GcsCapacity, gcs.name.clone(), peak as f64, gcs.max_vehicles as f64));
        }
    }
}

fn check_coverage(ctx: &PlanContext, r: &EvaluationReport, v: &mut Vec<Violation>) {
    let max = ctx.mission.profile.coverage_max_s;
    for perf in r.uavs.iter().filter(|p| p.used) {
        let name = &ctx.mission.uavs[perf.uav].name;
        if perf.out_of_coverage_s > max + EPS {
            v.push(Violation::new(ReasonCode::CoverageTime, name.clone(), perf.out_of_coverage_s, max));
        }
        if perf.los_blocked_s > 0.0 {
            v.push(Violation::new(ReasonCode::Los, name.clone(), perf.los_blocked_s, 0.0));
        }
    }
}

fn check_caps(ctx: &PlanContext, r: &EvaluationReport, v: &mut Vec<Violation>) {
    let caps = &ctx.mission.profile.caps;
    let o = &r.objectives;
    let pairs = [
        (ReasonCode::CapMakespan, "makespan", o.makespan_s, caps.makespan_s),
        (ReasonCode::CapCost, "cost", o.cost, caps.cost),
        (ReasonCode::CapFlightTime, "flightTime", o.flight_time_s, caps.flight_time_s),
        (ReasonCode::CapFuel, "fuel", o.fuel_kg, caps.fuel_kg),
        (ReasonCode::CapDistance, "distance", o.distance_m, caps.distance_m),
    ];
    for (reason, what, value, cap) in pairs {
        if let Some(c) = cap {
            if value > c + EPS {
                v.push(Violation::new(reason, what, value, c));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CspError {
    #[error("failure histogram needs at least one report")]
    NoReports,
}

/// Violation counts per reason, most frequent first, ties by name.
pub fn failure_histogram(reports: &[CheckReport]) -> Result<Vec<(ReasonCode, usize)>, CspError> {
    if reports.is_empty() {
        return Err(CspError::NoReports);
    }
    let mut counts: BTreeMap<ReasonCode, usize> = BTreeMap::new();
    for v in reports.iter().flat_map(|r| &r.violations) {
        *counts.entry(v.reason).or_default() += 1;
    }
    let mut out: Vec<_> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.as_str().cmp(b.0.as_str())));
    Ok(out)
}
