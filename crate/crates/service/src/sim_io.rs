//! Glue between stored plans and the simulator, shared by the CLI and API.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use skyplan_core::geo::ElevationGrid;
use skyplan_core::mission::Mission;
use skyplan_core::plan::PlanContext;
use skyplan_core::sim::{SimState, TaskStatus, UavView};

use crate::error::{Result, ServiceError};
use crate::response::{decode_doc, PlanResponse, SolutionDoc};

/// `plans.json#2` style reference; the index defaults to 0.
pub fn split_plan_ref(s: &str) -> Result<(&str, usize)> {
    match s.rsplit_once('#') {
        None => Ok((s, 0)),
        Some((path, idx)) => {
            idx.parse().map(|i| (path, i)).map_err(|_| ServiceError::BadRequest(format!("bad solution index in {s:?}")))
        }
    }
}

pub fn solution(resp: &PlanResponse, index: usize) -> Result<&SolutionDoc> {
    resp.solutions.get(index).ok_or_else(|| {
        ServiceError::BadRequest(format!("solution {index} requested, plan has {}", resp.solutions.len()))
    })
}

/// Simulation of a solution planned for `mission` from the ground.
pub fn start_sim(mission: &Mission, grid: Arc<ElevationGrid>, sol: &SolutionDoc) -> Result<SimState> {
    let ctx = PlanContext::new(mission.clone(), grid)?;
    let sched = decode_doc(&ctx, &sol.genome)?;
    Ok(SimState::start(mission, &sched)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskReport {
    pub id: String,
    pub objective: String,
    pub status: TaskStatus,
    pub uavs: Vec<String>,
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub frozen: bool,
}

/// Final or current state of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimReport {
    pub mission: String,
    pub clock: f64,
    pub finished: bool,
    pub events: usize,
    pub uavs: Vec<UavView>,
    pub tasks: Vec<TaskReport>,
}

pub fn report(sim: &SimState) -> SimReport {
    let view = sim.view();
    let tasks = sim
        .tasks
        .tasks
        .iter()
        .enumerate()
        .map(|(t, task)| {
            let r = sim.records[t].as_ref();
            TaskReport {
                id: task.id.clone(),
                objective: task.objective.clone(),
                status: sim.task_status[t],
                uavs: r.map(|r| r.uavs.iter().map(|&u| sim.mission.uavs[u].name.clone()).collect()).unwrap_or_default(),
                start: r.map(|r| r.start),
                end: r.map(|r| r.end),
                frozen: r.is_some_and(|r| r.frozen),
            }
        })
        .collect();
    SimReport {
        mission: sim.mission.name.clone(),
        clock: view.clock,
        finished: view.finished,
        events: sim.events.len(),
        uavs: view.uavs,
        tasks,
    }
}
