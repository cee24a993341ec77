//! Documents exchanged with planners and clients.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use skyplan_core::dss::{
    filter_similar, vikor_rank, weights_from_profile, CriteriaMatrix, DEFAULT_SIMILARITY_THRESHOLD, DEFAULT_V,
};
use skyplan_core::mission::ProfileKind;
use skyplan_core::moea::{Mode, PlannerResult, SearchConfig};
use skyplan_core::plan::{decode_schedule, GenomeDoc, Objectives, Phase, PlanContext, PlanGenome, Risks, Schedule};
use skyplan_core::sim::SimSnapshot;

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankOptions {
    /// VIKOR weight of group utility against individual regret.
    pub v: f64,
    pub similarity_threshold: f64,
}

impl Default for RankOptions {
    fn default() -> Self {
        Self { v: DEFAULT_V, similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD }
    }
}

/// Input of a planner run, in-process or over stdin of an external planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanRequest {
    pub schema_version: u32,
    /// Mission document (wire format); unused when a snapshot is given.
    #[serde(default)]
    pub mission: Value,
    /// EGRID terrain text; flat sea-level terrain when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation: Option<String>,
    pub config: SearchConfig,
    #[serde(default)]
    pub rank: RankOptions,
    /// Plan being replaced (replan mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous: Option<GenomeDoc>,
    /// State to plan from (replan mode); its mission takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<SimSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanResponse {
    pub schema_version: u32,
    pub mission: String,
    pub mode: Mode,
    pub seed: u64,
    pub runtime_s: f64,
    pub generations: usize,
    pub evaluations: usize,
    pub wall_time_s: f64,
    pub canceled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_time: Option<f64>,
    /// Best first.
    pub solutions: Vec<SolutionDoc>,
    /// Most frequent violations; only when `solutions` is empty.
    pub histogram: Vec<HistogramEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub reason: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolutionDoc {
    pub rank: usize,
    pub s: f64,
    pub r: f64,
    pub q: f64,
    pub in_compromise_set: bool,
    pub genome: GenomeDoc,
    pub objectives: Objectives,
    pub risks: Risks,
    pub min_separation_m: Option<f64>,
    pub tasks: Vec<TaskRow>,
    pub uavs: Vec<UavBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskRow {
    pub objective: String,
    pub task: String,
    pub uavs: Vec<String>,
    /// When the first assigned vehicle sets off towards the task.
    pub departure: f64,
    pub profile: ProfileKind,
    pub wait_s: f64,
    pub start: f64,
    pub sensor: String,
    pub duration_s: f64,
    pub end: f64,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UavBlock {
    pub name: String,
    /// Task ids in flying order.
    pub tasks: Vec<String>,
    pub gcs: Option<String>,
    pub departure: Option<f64>,
    pub return_time: Option<f64>,
    pub return_profile: ProfileKind,
    pub cost: f64,
    pub flight_time_s: f64,
    pub distance_m: f64,
    pub fuel_kg: f64,
    pub fuel_pct: f64,
    pub min_clearance_m: Option<f64>,
    pub out_of_coverage_s: f64,
    pub out_of_coverage: Vec<[f64; 2]>,
    pub risks: Risks,
    pub route: Vec<Waypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Waypoint {
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
    pub alt_m: f64,
    pub ground_m: Option<f64>,
    pub speed_mps: f64,
    pub phase: Phase,
    pub task: Option<String>,
}

/// Ranks the solutions of a run and lays them out for display.
pub fn build_response(
    ctx: &PlanContext,
    res: &PlannerResult,
    mode: Mode,
    snapshot_time: Option<f64>,
    opts: RankOptions,
) -> Result<PlanResponse> {
    let mut solutions = Vec::new();
    if !res.solutions.is_empty() {
        let reports: Vec<_> = res.solutions.iter().map(|s| &s.report).collect();
        let docs: Vec<GenomeDoc> = res.solutions.iter().map(|s| s.genome.to_doc(ctx)).collect();
        let keys = docs.iter().map(|d| serde_json::to_string(d).expect("plain data")).collect();
        let mat = CriteriaMatrix::from_reports(&reports, keys)?;
        let w = weights_from_profile(&ctx.mission.profile)?;
        let ranked = vikor_rank(&mat, &w, opts.v)?;
        let genomes: Vec<PlanGenome> = res.solutions.iter().map(|s| s.genome.clone()).collect();
        for p in filter_similar(&ranked, &genomes, opts.similarity_threshold) {
            let sol = &res.solutions[p.index];
            solutions.push(SolutionDoc {
                rank: p.rank,
                s: p.s,
                r: p.r,
                q: p.q,
                in_compromise_set: p.in_compromise_set,
                genome: docs[p.index].clone(),
                objectives: sol.report.objectives,
                risks: sol.report.risks,
                min_separation_m: sol.report.min_separation_m,
                tasks: task_rows(ctx, &sol.schedule),
                uavs: uav_blocks(ctx, &sol.schedule, &sol.report),
            });
        }
    }
    Ok(PlanResponse {
        schema_version: SCHEMA_VERSION,
        mission: ctx.mission.name.clone(),
        mode,
        seed: res.seed,
        runtime_s: res.runtime_s,
        generations: res.generations,
        evaluations: res.evaluations,
        wall_time_s: res.wall_time_s,
        canceled: res.canceled,
        snapshot_time,
        solutions,
        histogram: res
            .histogram
            .iter()
            .map(|(r, n)| HistogramEntry { reason: r.as_str().to_string(), count: *n })
            .collect(),
    })
}

fn task_rows(ctx: &PlanContext, s: &Schedule) -> Vec<TaskRow> {
    let m = &ctx.mission;
    s.tasks
        .iter()
        .flatten()
        .map(|r| {
            let task = &ctx.tasks.tasks[r.task];
            let departure = s
                .uavs
                .iter()
                .flat_map(|p| &p.legs)
                .filter(|l| l.task == Some(r.task))
                .map(|l| l.departure)
                .fold(f64::INFINITY, f64::min);
            TaskRow {
                objective: task.objective.clone(),
                task: task.name.clone(),
                uavs: r.uavs.iter().map(|&u| m.uavs[u].name.clone()).collect(),
                // frozen work has no leg in the new plan
                departure: if departure.is_finite() {
                    departure
                } else {
                    r.arrivals.iter().copied().fold(r.start, f64::min)
                },
                profile: r.profile,
                wait_s: r.waits.iter().copied().fold(0.0, f64::max),
                start: r.start,
                sensor: r.sensor.clone(),
                duration_s: r.end - r.start,
                end: r.end,
                frozen: r.frozen,
            }
        })
        .collect()
}

fn uav_blocks(ctx: &PlanContext, s: &Schedule, rep: &skyplan_core::plan::EvaluationReport) -> Vec<UavBlock> {
    let m = &ctx.mission;
    rep.uavs
        .iter()
        .filter(|p| p.used)
        .map(|p| {
            let plan = &s.uavs[p.uav];
            let mut route = Vec::new();
            let mut wp = |t: f64, q: &skyplan_core::geo::GeoPoint, seg: &skyplan_core::plan::Segment| {
                route.push(Waypoint {
                    t,
                    lat: q.lat,
                    lon: q.lon,
                    alt_m: q.alt.unwrap_or(0.0),
                    ground_m: ctx.grid.elevation_at(q).ok(),
                    speed_mps: seg.speed_mps,
                    phase: seg.phase,
                    task: seg.task.map(|t| ctx.tasks.tasks[t].id.clone()),
                })
            };
            if let Some(first) = plan.segments.first() {
                wp(first.t0, &first.from, first);
            }
            for seg in &plan.segments {
                wp(seg.t1, &seg.to, seg);
            }
            UavBlock {
                name: m.uavs[p.uav].name.clone(),
                tasks: p.tasks.iter().map(|&t| ctx.tasks.tasks[t].id.clone()).collect(),
                gcs: p.gcs.map(|g| m.gcss[g].name.clone()),
                departure: p.departure,
                return_time: p.return_time,
                return_profile: p.return_profile,
                cost: p.cost,
                flight_time_s: p.flight_time_s,
                distance_m: p.distance_m,
                fuel_kg: p.fuel_kg,
                fuel_pct: p.fuel_pct,
                min_clearance_m: p.min_clearance_m,
                out_of_coverage_s: p.out_of_coverage_s,
                out_of_coverage: p.out_of_coverage.iter().map(|&(a, b)| [a, b]).collect(),
                risks: p.risks,
                route,
            }
        })
        .collect()
}

/// Schedule of a stored solution in `ctx`.
pub fn decode_doc(ctx: &PlanContext, doc: &GenomeDoc) -> Result<Schedule> {
    let mut rng: rand_chacha::ChaCha8Rng = rand::SeedableRng::seed_from_u64(0);
    let g = PlanGenome::from_doc(ctx, doc, &mut rng);
    Ok(decode_schedule(ctx, &g)?)
}
