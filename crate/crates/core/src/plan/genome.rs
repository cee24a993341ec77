use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{PlanContext, PlanError};
use crate::mission::ProfileKind;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Assignment {
    Omitted,
    /// Sorted, non-empty UAV indices.
    Uavs(Vec<usize>),
}

impl Assignment {
    pub fn uavs(&self) -> &[usize] {
        match self {
            Assignment::Omitted => &[],
            Assignment::Uavs(u) => u,
        }
    }

    pub fn is_omitted(&self) -> bool {
        matches!(self, Assignment::Omitted)
    }
}

/// Decision variables of a plan.
///
/// Per task: assigned vehicles, a rank, the cruise profile of the leg flown
/// to it and the sensor option used. Per UAV: controlling GCS and the profile
/// of the return leg. Ranks form a permutation of `0..n_tasks`; each
/// vehicle flies its tasks in increasing rank.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlanGenome {
    pub assignment: Vec<Assignment>,
    pub rank: Vec<u32>,
    pub profile: Vec<ProfileKind>,
    /// Index into the task's sensor options.
    pub sensor: Vec<usize>,
    pub gcs: Vec<Option<usize>>,
    pub return_profile: Vec<ProfileKind>,
}

impl PlanGenome {
    pub fn n_tasks(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.gcs.len()
    }

    /// Number of legs with a profile gene: one per task plus one return leg
    /// per UAV.
    pub fn n_legs(&self) -> usize {
        self.profile.len() + self.return_profile.len()
    }

    /// Tasks assigned to `uav`, excluding frozen ones, in flying order.
    pub fn sequence(&self, ctx: &PlanContext, uav: usize) -> Vec<usize> {
        let mut seq: Vec<usize> =
            (0..self.n_tasks()).filter(|&t| !ctx.is_frozen(t) && self.assignment[t].uavs().contains(&uav)).collect();
        seq.sort_by_key(|&t| self.rank[t]);
        seq
    }

    pub fn random<R: Rng + ?Sized>(ctx: &PlanContext, rng: &mut R) -> Self {
        let n = ctx.n_tasks();
        let mut rank: Vec<u32> = (0..n as u32).collect();
        rank.shuffle(rng);
        let mut g = PlanGenome {
            assignment: vec![Assignment::Omitted; n],
            rank,
            profile: (0..n).map(|_| random_profile(ctx, rng)).collect(),
            sensor: vec![0; n],
            gcs: (0..ctx.n_uavs()).map(|u| ctx.gcs_options(u).choose(rng).copied()).collect(),
            return_profile: (0..ctx.n_uavs()).map(|_| random_profile(ctx, rng)).collect(),
        };
        for t in 0..n {
            g.randomize_task(ctx, t, rng);
        }
        g.repair(ctx, rng);
        g
    }

    /// Picks a fresh sensor and vehicle set for `task`. Optional tasks are
    /// left out now and then.
    pub fn randomize_task<R: Rng + ?Sized>(&mut self, ctx: &PlanContext, t: usize, rng: &mut R) {
        let sensors = ctx.usable_sensors(t);
        let task = &ctx.tasks.tasks[t];
        if sensors.is_empty() || (!task.mandatory && rng.gen_bool(0.15)) {
            self.assignment[t] = Assignment::Omitted;
            return;
        }
        let s = *sensors.choose(rng).expect("non-empty");
        self.sensor[t] = s;
        let carriers = ctx.carriers(t, s);
        let k = if task.multi_vehicle && carriers.len() > 1 {
            // small teams are the common case
            1 + (rng.gen::<f64>().powi(2) * carriers.len() as f64) as usize
        } else {
            1
        };
        let mut uavs: Vec<usize> = carriers.choose_multiple(rng, k.min(carriers.len())).copied().collect();
        uavs.sort_unstable();
        self.assignment[t] = Assignment::Uavs(uavs);
    }

    /// Restores every structural invariant with as few changes as possible.
    pub fn repair<R: Rng + ?Sized>(&mut self, ctx: &PlanContext, rng: &mut R) {
        let n = ctx.n_tasks();
        for t in 0..n {
            if let Some(rec) = &ctx.frozen[t] {
                let task = &ctx.tasks.tasks[t];
                self.assignment[t] = Assignment::Uavs(rec.uavs.clone());
                self.sensor[t] = task.sensors.iter().position(|s| *s == rec.sensor).unwrap_or(0);
                self.profile[t] = rec.profile;
                continue;
            }
            let task = &ctx.tasks.tasks[t];
            if self.sensor[t] >= task.sensors.len() {
                self.sensor[t] = 0;
            }
            let uavs = match &mut self.assignment[t] {
                Assignment::Omitted => {
                    if task.mandatory {
                        self.randomize_task(ctx, t, rng);
                    }
                    continue;
                }
                Assignment::Uavs(u) => u,
            };
            uavs.sort_unstable();
            uavs.dedup();
            uavs.retain(|&u| u < ctx.n_uavs());
            if !task.multi_vehicle && uavs.len() > 1 {
                let keep = *uavs.choose(rng).expect("non-empty");
                *uavs = vec![keep];
            }
            // keep the sensor if every vehicle carries it, else the option
            // carried by the most of them
            let carried = |s: usize, uavs: &[usize]| uavs.iter().filter(|u| ctx.carriers(t, s).contains(u)).count();
            if uavs.is_empty() || carried(self.sensor[t], uavs) < uavs.len() {
                let best = ctx.usable_sensors(t).into_iter().max_by_key(|&s| (carried(s, uavs), usize::MAX - s));
                match best {
                    Some(s) if carried(s, uavs) > 0 => {
                        self.sensor[t] = s;
                        uavs.retain(|u| ctx.carriers(t, s).contains(u));
                    }
                    _ => self.randomize_task(ctx, t, rng),
                }
            }
        }
        for t in 0..n {
            if !ctx.is_frozen(t) && !ctx.profiles.contains(&self.profile[t]) {
                self.profile[t] = random_profile(ctx, rng);
            }
        }
        self.normalize_rank();
        for u in 0..ctx.n_uavs() {
            if !ctx.profiles.contains(&self.return_profile[u]) {
                self.return_profile[u] = random_profile(ctx, rng);
            }
            let opts = ctx.gcs_options(u);
            if !self.gcs[u].is_some_and(|g| opts.contains(&g)) {
                self.gcs[u] = opts.choose(rng).copied();
            }
        }
    }

    /// Turns arbitrary rank keys back into a permutation, preserving their
    /// relative order (ties by task index).
    pub fn normalize_rank(&mut self) {
        let mut idx: Vec<usize> = (0..self.rank.len()).collect();
        idx.sort_by_key(|&t| (self.rank[t], t));
        for (r, t) in idx.into_iter().enumerate() {
            self.rank[t] = r as u32;
        }
    }

    /// Structural check against the context.
    pub fn validate(&self, ctx: &PlanContext) -> Result<(), PlanError> {
        let (n, m) = (ctx.n_tasks(), ctx.n_uavs());
        if self.assignment.len() != n || self.rank.len() != n || self.profile.len() != n || self.sensor.len() != n {
            return Err(PlanError::decode("tasks", format!("expected {n} task genes")));
        }
        if self.gcs.len() != m || self.return_profile.len() != m {
            return Err(PlanError::decode("uavs", format!("expected {m} UAV genes")));
        }
        let mut seen = vec![false; n];
        for &r in &self.rank {
            if (r as usize) >= n || std::mem::replace(&mut seen[r as usize], true) {
                return Err(PlanError::decode("rank", "ranks must be a permutation"));
            }
        }
        for t in 0..n {
            let task = &ctx.tasks.tasks[t];
            let gene = |what: &str| format!("{}.{what}", task.id);
            if !ProfileKind::CRUISE.contains(&self.profile[t])
                || (!ctx.is_frozen(t) && !ctx.profiles.contains(&self.profile[t]))
            {
                return Err(PlanError::decode(gene("profile"), "leg profile not allowed"));
            }
            match &self.assignment[t] {
                Assignment::Omitted if task.mandatory => {
                    return Err(PlanError::decode(gene("uavs"), "mandatory task omitted"));
                }
                Assignment::Omitted => {}
                Assignment::Uavs(uavs) => {
                    if uavs.is_empty() || uavs.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(PlanError::decode(gene("uavs"), "UAV set must be sorted and non-empty"));
                    }
                    if uavs.len() > 1 && !task.multi_vehicle {
                        return Err(PlanError::decode(gene("uavs"), "single-vehicle task given several UAVs"));
                    }
                    let Some(sensor) = task.sensors.get(self.sensor[t]) else {
                        return Err(PlanError::decode(gene("sensor"), "no such sensor option"));
                    };
                    for &u in uavs {
                        if u >= m {
                            return Err(PlanError::decode(gene("uavs"), format!("no UAV {u}")));
                        }
                        if !ctx.mission.uavs[u].has_sensor(sensor) {
                            return Err(PlanError::decode(
                                gene("sensor"),
                                format!("{} does not carry {sensor}", ctx.mission.uavs[u].name),
                            ));
                        }
                    }
                }
            }
            if let Some(rec) = &ctx.frozen[t] {
                if self.assignment[t].uavs() != rec.uavs.as_slice() {
                    return Err(PlanError::decode(gene("uavs"), "frozen task reassigned"));
                }
            }
        }
        for u in 0..m {
            if !ctx.profiles.contains(&self.return_profile[u]) {
                return Err(PlanError::decode(
                    format!("{}.returnProfile", ctx.mission.uavs[u].name),
                    "return profile not allowed",
                ));
            }
            if let Some(g) = self.gcs[u] {
                if g >= ctx.mission.gcss.len() {
                    return Err(PlanError::decode(format!("{}.gcs", ctx.mission.uavs[u].name), "no such GCS"));
                }
            }
        }
        Ok(())
    }

    /// Named, index-free form for storage and exchange.
    pub fn to_doc(&self, ctx: &PlanContext) -> GenomeDoc {
        let m = &ctx.mission;
        GenomeDoc {
            tasks: (0..self.n_tasks())
                .map(|t| {
                    let task = &ctx.tasks.tasks[t];
                    GenomeTask {
                        id: task.id.clone(),
                        uavs: self.assignment[t].uavs().iter().map(|&u| m.uavs[u].name.clone()).collect(),
                        rank: self.rank[t],
                        profile: self.profile[t],
                        sensor: task.sensors.get(self.sensor[t]).cloned().unwrap_or_default(),
                    }
                })
                .collect(),
            uavs: (0..self.n_uavs())
                .map(|u| GenomeUav {
                    name: m.uavs[u].name.clone(),
                    gcs: self.gcs[u].map(|g| m.gcss[g].name.clone()),
                    return_profile: self.return_profile[u],
                })
                .collect(),
        }
    }

    /// Maps a stored genome onto `ctx`, which may have gained or lost tasks
    /// and vehicles. Unknown names are dropped, new tasks get a random
    /// assignment and are ranked after the known ones, then the result is
    /// repaired.
    pub fn from_doc<R: Rng + ?Sized>(ctx: &PlanContext, doc: &GenomeDoc, rng: &mut R) -> Self {
        let m = &ctx.mission;
        let uav_idx: HashMap<&str, usize> = m.uavs.iter().enumerate().map(|(i, u)| (u.name.as_str(), i)).collect();
        let gcs_idx: HashMap<&str, usize> = m.gcss.iter().enumerate().map(|(i, g)| (g.name.as_str(), i)).collect();
        let by_id: HashMap<&str, &GenomeTask> = doc.tasks.iter().map(|t| (t.id.as_str(), t)).collect();
        let n = ctx.n_tasks();
        let mut g = PlanGenome {
            assignment: vec![Assignment::Omitted; n],
            rank: vec![0; n],
            profile: vec![ProfileKind::MinConsumption; n],
            sensor: vec![0; n],
            gcs: vec![None; ctx.n_uavs()],
            return_profile: vec![ProfileKind::MinConsumption; ctx.n_uavs()],
        };
        let offset = doc.tasks.len() as u32;
        for t in 0..n {
            let task = &ctx.tasks.tasks[t];
            match by_id.get(task.id.as_str()) {
                Some(gt) => {
                    let mut uavs: Vec<usize> =
                        gt.uavs.iter().filter_map(|n| uav_idx.get(n.as_str()).copied()).collect();
                    uavs.sort_unstable();
                    g.assignment[t] = if uavs.is_empty() { Assignment::Omitted } else { Assignment::Uavs(uavs) };
                    g.rank[t] = gt.rank;
                    g.profile[t] = if ProfileKind::CRUISE.contains(&gt.profile) {
                        gt.profile
                    } else {
                        ProfileKind::MinConsumption
                    };
                    g.sensor[t] = task.sensors.iter().position(|s| *s == gt.sensor).unwrap_or(0);
                }
                None => {
                    g.rank[t] = offset + t as u32;
                    g.profile[t] = random_profile(ctx, rng);
                    g.randomize_task(ctx, t, rng);
                    // new work must be attempted
                    if g.assignment[t].is_omitted() && !ctx.usable_sensors(t).is_empty() {
                        while g.assignment[t].is_omitted() {
                            g.randomize_task(ctx, t, rng);
                        }
                    }
                }
            }
        }
        for gu in &doc.uavs {
            if let Some(&u) = uav_idx.get(gu.name.as_str()) {
                g.gcs[u] = gu.gcs.as_deref().and_then(|n| gcs_idx.get(n).copied());
                if ProfileKind::CRUISE.contains(&gu.return_profile) {
                    g.return_profile[u] = gu.return_profile;
                }
            }
        }
        g.repair(ctx, rng);
        g
    }
}

fn random_profile<R: Rng + ?Sized>(ctx: &PlanContext, rng: &mut R) -> ProfileKind {
    *ctx.profiles.choose(rng).expect("non-empty profile set")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GenomeTask {
    pub id: String,
    /// Empty when the task is omitted.
    pub uavs: Vec<String>,
    pub rank: u32,
    pub profile: ProfileKind,
    pub sensor: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GenomeUav {
    pub name: String,
    pub gcs: Option<String>,
    pub return_profile: ProfileKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenomeDoc {
    pub tasks: Vec<GenomeTask>,
    pub uavs: Vec<GenomeUav>,
}
