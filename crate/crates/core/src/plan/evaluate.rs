use serde::{Deserialize, Serialize};

use super::{Phase, PlanContext, PlanError, Schedule, Segment, SegmentKind, UavPlan};
use crate::geo::{ground_clearance_profile, slant_distance, GeoPoint, LocalFrame};
use crate::mission::{ProfileKind, RankingVariable};

/// Order of [`Objectives::to_min_vector`].
pub const OBJECTIVE_NAMES: [&str; 8] = ["makespan", "cost", "fuel", "flightTime", "distance", "uavs", "tasks", "gcss"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskDirection {
    /// Risk grows as the value falls (ground clearance, separation):
    /// `value <= low` is 100 %, `value >= high` is 0 %.
    LowIsRisky,
    /// Risk grows with the value (fuel usage, time out of coverage):
    /// `value <= low` is 0 %, `value >= high` is 100 %.
    HighIsRisky,
}

/// Linear risk between two operator thresholds, clamped to [0, 100].
pub fn risk_interp(value: f64, low: f64, high: f64, dir: RiskDirection) -> Result<f64, PlanError> {
    if !(low.is_finite() && high.is_finite() && low < high) {
        return Err(PlanError::InvalidInterval { low, high });
    }
    let f = ((value - low) / (high - low)).clamp(0.0, 1.0);
    Ok(match dir {
        RiskDirection::HighIsRisky => 100.0 * f,
        RiskDirection::LowIsRisky => 100.0 * (1.0 - f),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Objectives {
    pub makespan_s: f64,
    pub cost: f64,
    pub fuel_kg: f64,
    pub flight_time_s: f64,
    pub distance_m: f64,
    pub n_uavs: usize,
    pub n_tasks: usize,
    pub n_gcss: usize,
}

impl Objectives {
    /// All eight objectives as quantities to minimise; performed tasks are
    /// negated.
    pub fn to_min_vector(&self) -> [f64; 8] {
        [
            self.makespan_s,
            self.cost,
            self.fuel_kg,
            self.flight_time_s,
            self.distance_m,
            self.n_uavs as f64,
            -(self.n_tasks as f64),
            self.n_gcss as f64,
        ]
    }
}

/// Risk factors in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Risks {
    pub fuel: f64,
    pub ground: f64,
    pub coverage: f64,
    pub closeness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UavPerformance {
    pub uav: usize,
    pub used: bool,
    pub tasks: Vec<usize>,
    pub gcs: Option<usize>,
    pub departure: Option<f64>,
    pub return_time: Option<f64>,
    pub return_profile: ProfileKind,
    pub cost: f64,
    pub flight_time_s: f64,
    pub distance_m: f64,
    pub fuel_kg: f64,
    pub fuel_pct: f64,
    /// Lowest height above terrain away from take-off and landing.
    pub min_clearance_m: Option<f64>,
    pub max_altitude_m: Option<f64>,
    pub max_speed_mps: f64,
    pub out_of_coverage_s: f64,
    /// Part of `out_of_coverage_s` caused by terrain during tasks that need
    /// line of sight.
    pub los_blocked_s: f64,
    /// Time intervals spent out of coverage, merged.
    pub out_of_coverage: Vec<(f64, f64)>,
    pub risks: Risks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluationReport {
    pub objectives: Objectives,
    pub risks: Risks,
    pub uavs: Vec<UavPerformance>,
    pub min_clearance_m: Option<f64>,
    pub min_separation_m: Option<f64>,
}

impl EvaluationReport {
    pub fn objective_vector(&self) -> [f64; 8] {
        self.objectives.to_min_vector()
    }

    /// Raw value of every ranking variable, in [`RankingVariable::ALL`]
    /// order.
    pub fn criteria_row(&self) -> [f64; 12] {
        RankingVariable::ALL.map(|v| self.criterion(v))
    }

    pub fn criterion(&self, v: RankingVariable) -> f64 {
        let o = &self.objectives;
        let r = &self.risks;
        match v {
            RankingVariable::Makespan => o.makespan_s,
            RankingVariable::Cost => o.cost,
            RankingVariable::Fuel => o.fuel_kg,
            RankingVariable::FlightTime => o.flight_time_s,
            RankingVariable::Distance => o.distance_m,
            RankingVariable::FuelRisk => r.fuel,
            RankingVariable::GroundRisk => r.ground,
            RankingVariable::CoverageRisk => r.coverage,
            RankingVariable::ClosenessRisk => r.closeness,
            RankingVariable::Uavs => o.n_uavs as f64,
            RankingVariable::Tasks => o.n_tasks as f64,
            RankingVariable::Gcss => o.n_gcss as f64,
        }
    }
}

/// Measures a decoded schedule.
pub fn evaluate(ctx: &PlanContext, s: &Schedule) -> Result<EvaluationReport, PlanError> {
    let prof = &ctx.mission.profile;
    let mut uavs = Vec::with_capacity(s.uavs.len());
    for p in &s.uavs {
        uavs.push(uav_performance(ctx, p)?);
    }
    let used: Vec<&UavPerformance> = uavs.iter().filter(|u| u.used).collect();
    let mut gcss: Vec<usize> = used.iter().filter_map(|u| u.gcs).collect();
    gcss.sort_unstable();
    gcss.dedup();
    let objectives = Objectives {
        makespan_s: s.makespan(),
        cost: used.iter().map(|u| u.cost).sum(),
        fuel_kg: used.iter().map(|u| u.fuel_kg).sum(),
        flight_time_s: used.iter().map(|u| u.flight_time_s).sum(),
        distance_m: used.iter().map(|u| u.distance_m).sum(),
        n_uavs: used.len(),
        n_tasks: s.tasks.iter().flatten().count(),
        n_gcss: gcss.len(),
    };
    let min_separation_m = min_separation(ctx, s);
    let closeness = match min_separation_m {
        Some(d) => risk_interp(d, prof.sep_min_m, prof.sep_risked_m, RiskDirection::LowIsRisky)?,
        None => 0.0,
    };
    let worst = |f: fn(&Risks) -> f64| used.iter().map(|u| f(&u.risks)).fold(0.0, f64::max);
    let risks =
        Risks { fuel: worst(|r| r.fuel), ground: worst(|r| r.ground), coverage: worst(|r| r.coverage), closeness };
    let min_clearance_m = used.iter().filter_map(|u| u.min_clearance_m).reduce(f64::min);
    Ok(EvaluationReport { objectives, risks, uavs, min_clearance_m, min_separation_m })
}

fn uav_performance(ctx: &PlanContext, p: &UavPlan) -> Result<UavPerformance, PlanError> {
    let vt = &ctx.vtypes[p.uav];
    let prof = &ctx.mission.profile;
    let return_profile = p.legs.last().map_or(ProfileKind::MinConsumption, |l| l.profile);
    if !p.is_used() {
        return Ok(UavPerformance {
            uav: p.uav,
            used: false,
            tasks: Vec::new(),
            gcs: p.gcs,
            departure: None,
            return_time: None,
            return_profile,
            cost: 0.0,
            flight_time_s: 0.0,
            distance_m: 0.0,
            fuel_kg: 0.0,
            fuel_pct: 0.0,
            min_clearance_m: None,
            max_altitude_m: None,
            max_speed_mps: 0.0,
            out_of_coverage_s: 0.0,
            los_blocked_s: 0.0,
            out_of_coverage: Vec::new(),
            risks: Risks::default(),
        });
    }
    let flight_time_s = p.flight_time();
    let fuel_kg = p.fuel_burned();
    let fuel_pct = if p.start.fuel_kg > 0.0 { 100.0 * fuel_kg / p.start.fuel_kg } else { 100.0 };
    let min_clearance_m = min_clearance(ctx, p)?;
    let cov = coverage(ctx, p)?;
    let risks = Risks {
        fuel: risk_interp(fuel_pct, prof.fuel_risked_pct, prof.fuel_max_pct, RiskDirection::HighIsRisky)?,
        ground: match min_clearance_m {
            Some(c) => risk_interp(c, prof.ground_min_m, prof.ground_risked_m, RiskDirection::LowIsRisky)?,
            None => 0.0,
        },
        coverage: risk_interp(cov.out_s, prof.coverage_min_s, prof.coverage_max_s, RiskDirection::HighIsRisky)?,
        closeness: 0.0,
    };
    let alts = p.segments.iter().flat_map(|g| [g.from.alt, g.to.alt]).flatten();
    Ok(UavPerformance {
        uav: p.uav,
        used: true,
        tasks: p.tasks.clone(),
        gcs: p.gcs,
        departure: p.departure(),
        return_time: p.landing(),
        return_profile,
        cost: vt.cost_per_hour * flight_time_s / 3600.0,
        flight_time_s,
        distance_m: p.distance(),
        fuel_kg,
        fuel_pct,
        min_clearance_m,
        max_altitude_m: alts.reduce(f64::max),
        max_speed_mps: p.segments.iter().map(|g| g.speed_mps).fold(0.0, f64::max),
        out_of_coverage_s: cov.out_s,
        los_blocked_s: cov.los_s,
        out_of_coverage: cov.intervals,
        risks,
    })
}

/// Segments that count for ground and closeness risk: airborne flight away
/// from the take-off climb and landing descent.
fn en_route(p: &UavPlan) -> impl Iterator<Item = &Segment> {
    p.segments.iter().filter(|g| !g.terminal)
}

fn min_clearance(ctx: &PlanContext, p: &UavPlan) -> Result<Option<f64>, PlanError> {
    let step = ctx.resolution.clearance_step_m;
    let mut best: Option<f64> = None;
    for g in en_route(p) {
        let pts: &[GeoPoint] = if g.kind == SegmentKind::Hold { &[g.from][..] } else { &[g.from, g.to][..] };
        for c in ground_clearance_profile(&ctx.grid, pts, step)? {
            best = Some(best.map_or(c.clearance(), |b| b.min(c.clearance())));
        }
    }
    Ok(best)
}

struct Coverage {
    out_s: f64,
    los_s: f64,
    intervals: Vec<(f64, f64)>,
}

fn coverage(ctx: &PlanContext, p: &UavPlan) -> Result<Coverage, PlanError> {
    let (Some(t0), Some(t1)) = (p.departure(), p.landing()) else {
        return Ok(Coverage { out_s: 0.0, los_s: 0.0, intervals: Vec::new() });
    };
    let dt = ctx.resolution.coverage_step_s;
    let los_tasks: Vec<bool> =
        (0..ctx.n_tasks()).map(|t| ctx.mission.objectives[ctx.tasks.objective_of[t]].requires_los).collect();
    let mut out = Coverage { out_s: 0.0, los_s: 0.0, intervals: Vec::new() };
    let mut seg = 0;
    let mut a = t0;
    while a < t1 {
        let b = (a + dt).min(t1);
        let mid = 0.5 * (a + b);
        while seg + 1 < p.segments.len() && p.segments[seg].t1 < mid {
            seg += 1;
        }
        let g = &p.segments[seg];
        let pos = g.position_at(mid);
        let (lost, los) = match p.gcs {
            None => (true, false),
            Some(k) => {
                let station = ctx.gcs_pos[k];
                if slant_distance(&station, &pos) > ctx.mission.gcss[k].range_m {
                    (true, false)
                } else if g.phase == Phase::Task
                    && g.task.is_some_and(|t| los_tasks[t])
                    && !ctx.grid.line_of_sight(&station, &pos, ctx.resolution.los_step_m)?
                {
                    (true, true)
                } else {
                    (false, false)
                }
            }
        };
        if lost {
            out.out_s += b - a;
            if los {
                out.los_s += b - a;
            }
            match out.intervals.last_mut() {
                Some(last) if (last.1 - a).abs() < 1e-9 => last.1 = b,
                _ => out.intervals.push((a, b)),
            }
        }
        a = b;
    }
    Ok(out)
}

/// Closest approach of two points moving linearly during `[0, span]`, given
/// relative position `r` and relative velocity `v` at time 0. Returns the
/// time and the distance.
pub fn closest_approach(r: [f64; 3], v: [f64; 3], span: f64) -> (f64, f64) {
    let vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let rv = r[0] * v[0] + r[1] * v[1] + r[2] * v[2];
    let t = if vv > 0.0 { (-rv / vv).clamp(0.0, span) } else { 0.0 };
    let d = [r[0] + v[0] * t, r[1] + v[1] * t, r[2] + v[2] * t];
    (t, (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
}

fn local(frame: &LocalFrame, p: &GeoPoint) -> [f64; 3] {
    let (x, y) = frame.project(p);
    [x, y, p.alt.unwrap_or(0.0)]
}

fn segment_separation(frame: &LocalFrame, a: &Segment, b: &Segment) -> Option<f64> {
    let lo = a.t0.max(b.t0);
    let hi = a.t1.min(b.t1);
    if hi < lo {
        return None;
    }
    let pa = local(frame, &a.position_at(lo));
    let pb = local(frame, &b.position_at(lo));
    let qa = local(frame, &a.position_at(hi));
    let qb = local(frame, &b.position_at(hi));
    let span = hi - lo;
    let r = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
    let v = if span > 0.0 { [0, 1, 2].map(|i| ((qb[i] - qa[i]) - r[i]) / span) } else { [0.0; 3] };
    Some(closest_approach(r, v, span).1)
}

/// Smallest distance between any two vehicles while both are en route;
/// `None` when no two vehicles are ever en route together.
pub fn min_separation(ctx: &PlanContext, s: &Schedule) -> Option<f64> {
    let frame = LocalFrame::new(&ctx.mission.bounds.center());
    let mut best: Option<f64> = None;
    for (i, a) in s.uavs.iter().enumerate() {
        for b in &s.uavs[i + 1..] {
            let sb: Vec<&Segment> = en_route(b).collect();
            let mut k = 0;
            for ga in en_route(a) {
                while k < sb.len() && sb[k].t1 < ga.t0 {
                    k += 1;
                }
                for gb in &sb[k..] {
                    if gb.t0 > ga.t1 {
                        break;
                    }
                    if let Some(d) = segment_separation(&frame, ga, gb) {
                        best = Some(best.map_or(d, |x| x.min(d)));
                    }
                }
            }
        }
    }
    best
}

/// Closeness risk of a schedule; 0 when fewer than two vehicles fly
/// together.
pub fn closeness_risk(ctx: &PlanContext, s: &Schedule) -> Result<f64, PlanError> {
    let prof = &ctx.mission.profile;
    match min_separation(ctx, s) {
        Some(d) => risk_interp(d, prof.sep_min_m, prof.sep_risked_m, RiskDirection::LowIsRisky),
        None => Ok(0.0),
    }
}
