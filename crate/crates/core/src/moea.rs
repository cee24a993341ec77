//! Multi-objective search over plan genomes (NSGA-II with feasibility-first
//! domination and knee-point post-processing).

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csp::{check, CheckReport, ReasonCode};
use crate::plan::{
    decode_schedule, evaluate, Assignment, EvaluationReport, GenomeDoc, PlanContext, PlanError, PlanGenome, Schedule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Plan,
    Replan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchConfig {
    pub population: usize,
    /// `None` runs until the time limit.
    pub max_generations: Option<usize>,
    pub runtime_s: f64,
    pub seed: u64,
    pub crossover_rate: f64,
    /// Per-gene mutation probability; `None` means 1 / number of genes.
    pub mutation_rate: Option<f64>,
    /// Reduce the final front to extremes and knee points.
    pub knee: bool,
    pub mode: Mode,
}

impl SearchConfig {
    pub fn plan(runtime_s: f64, seed: u64) -> Self {
        Self {
            population: 64,
            max_generations: None,
            runtime_s,
            seed,
            crossover_rate: 0.9,
            mutation_rate: None,
            knee: true,
            mode: Mode::Plan,
        }
    }

    pub fn replan(runtime_s: f64, seed: u64) -> Self {
        Self { mode: Mode::Replan, ..Self::plan(runtime_s, seed) }
    }

    pub fn validate(&self) -> Result<(), MoeaError> {
        let bad = |m: &str| Err(MoeaError::Config(m.into()));
        if self.population < 4 || !self.population.is_multiple_of(2) {
            return bad("population must be even and at least 4");
        }
        if !(self.runtime_s > 0.0 && self.runtime_s.is_finite()) {
            return bad("runtime must be positive");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad("crossover rate must be in [0, 1]");
        }
        if let Some(m) = self.mutation_rate {
            if !(0.0..=1.0).contains(&m) {
                return bad("mutation rate must be in [0, 1]");
            }
        }
        Ok(())
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self::plan(60.0, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MoeaError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub genome: PlanGenome,
    pub schedule: Schedule,
    pub report: EvaluationReport,
    pub check: CheckReport,
}

impl Solution {
    pub fn objectives(&self) -> [f64; 8] {
        self.report.objective_vector()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerResult {
    pub solutions: Vec<Solution>,
    /// Violations counted over every plan checked during the search, most
    /// frequent first; filled when there is no solution.
    pub histogram: Vec<(ReasonCode, usize)>,
    pub generations: usize,
    pub evaluations: usize,
    pub wall_time_s: f64,
    pub seed: u64,
    pub runtime_s: f64,
    pub canceled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Progress {
    pub generation: usize,
    pub evaluations: usize,
    pub feasible: usize,
    pub front: usize,
    pub elapsed_s: f64,
}

/// Optional observers of a running search.
#[derive(Default, Clone, Copy)]
pub struct Hooks<'a> {
    pub progress: Option<&'a (dyn Fn(&Progress) + Sync)>,
    pub cancel: Option<&'a AtomicBool>,
}

impl Hooks<'_> {
    fn canceled(&self) -> bool {
        self.cancel.is_some_and(|c| c.load(Ordering::Relaxed))
    }
}

/// Fresh plan from random genomes.
pub fn plan(ctx: &PlanContext, cfg: &SearchConfig, hooks: Hooks) -> Result<PlannerResult, MoeaError> {
    cfg.validate()?;
    search(ctx, cfg, Vec::new(), hooks)
}

/// Plan from a later state, seeded with the previous plan mapped onto the
/// (possibly extended) task set plus mutants of it.
pub fn replan(
    ctx: &PlanContext,
    previous: &GenomeDoc,
    cfg: &SearchConfig,
    hooks: Hooks,
) -> Result<PlannerResult, MoeaError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let base = PlanGenome::from_doc(ctx, previous, &mut rng);
    let mut seeds = vec![base.clone()];
    let rate = 2.0 / gene_count(&base) as f64;
    for _ in 0..cfg.population / 4 {
        let mut g = base.clone();
        mutate(ctx, &mut g, rate.max(0.05), &mut rng);
        g.repair(ctx, &mut rng);
        seeds.push(g);
    }
    search(ctx, cfg, seeds, hooks)
}

#[derive(Debug, Clone)]
struct Individual {
    sol: Solution,
    obj: [f64; 8],
    /// Violation count and summed relative excess.
    viol: (usize, f64),
    rank: usize,
    crowd: f64,
}

impl Individual {
    fn feasible(&self) -> bool {
        self.viol.0 == 0
    }
}

fn assess(ctx: &PlanContext, genome: PlanGenome) -> Result<Individual, PlanError> {
    let schedule = decode_schedule(ctx, &genome)?;
    let report = evaluate(ctx, &schedule)?;
    let check = check(ctx, &schedule, &report);
    let mag = check.violations.iter().map(|v| (v.measured - v.limit).abs() / v.limit.abs().max(1.0)).sum();
    let viol = (check.violations.len(), mag);
    let obj = report.objective_vector();
    Ok(Individual { sol: Solution { genome, schedule, report, check }, obj, viol, rank: 0, crowd: 0.0 })
}

fn assess_all(ctx: &PlanContext, genomes: Vec<PlanGenome>) -> Result<Vec<Individual>, PlanError> {
    genomes.into_par_iter().map(|g| assess(ctx, g)).collect()
}

fn pareto_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

fn dominates(a: &Individual, b: &Individual) -> bool {
    match (a.feasible(), b.feasible()) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.viol.0 < b.viol.0 || (a.viol.0 == b.viol.0 && a.viol.1 < b.viol.1),
        (true, true) => pareto_dominates(&a.obj, &b.obj),
    }
}

/// Fronts as index lists, best first.
fn nondominated_sort(pop: &[Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominating: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&pop[i], &pop[j]) {
                dominating[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&pop[j], &pop[i]) {
                dominating[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominating[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

fn crowding(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowd = 0.0;
    }
    if front.len() <= 2 {
        for &i in front {
            pop[i].crowd = f64::INFINITY;
        }
        return;
    }
    for k in 0..8 {
        let mut idx = front.to_vec();
        idx.sort_by(|&a, &b| pop[a].obj[k].total_cmp(&pop[b].obj[k]).then(a.cmp(&b)));
        let lo = pop[idx[0]].obj[k];
        let hi = pop[idx[idx.len() - 1]].obj[k];
        pop[idx[0]].crowd = f64::INFINITY;
        pop[idx[idx.len() - 1]].crowd = f64::INFINITY;
        if hi > lo {
            for w in 1..idx.len() - 1 {
                let gap = (pop[idx[w + 1]].obj[k] - pop[idx[w - 1]].obj[k]) / (hi - lo);
                pop[idx[w]].crowd += gap;
            }
        }
    }
}

fn rank_population(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let fronts = nondominated_sort(pop);
    for (r, f) in fronts.iter().enumerate() {
        for &i in f {
            pop[i].rank = r;
        }
        crowding(pop, f);
    }
    fronts
}

/// True when `a` wins a binary tournament against `b`.
fn better(a: &Individual, b: &Individual) -> bool {
    match (a.feasible(), b.feasible()) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.viol.0 < b.viol.0 || (a.viol.0 == b.viol.0 && a.viol.1 <= b.viol.1),
        (true, true) => a.rank < b.rank || (a.rank == b.rank && a.crowd >= b.crowd),
    }
}

fn tournament<'a>(pop: &'a [Individual], rng: &mut ChaCha8Rng) -> &'a Individual {
    let a = &pop[rng.gen_range(0..pop.len())];
    let b = &pop[rng.gen_range(0..pop.len())];
    if better(a, b) {
        a
    } else {
        b
    }
}

fn gene_count(g: &PlanGenome) -> usize {
    (4 * g.n_tasks() + 2 * g.n_uavs()).max(1)
}

/// Uniform crossover within each gene class; task genes travel together so
/// a child never gets a sensor its vehicles lack.
fn crossover(a: &PlanGenome, b: &PlanGenome, rng: &mut ChaCha8Rng) -> (PlanGenome, PlanGenome) {
    let (mut c, mut d) = (a.clone(), b.clone());
    for t in 0..a.n_tasks() {
        if rng.gen_bool(0.5) {
            std::mem::swap(&mut c.assignment[t], &mut d.assignment[t]);
            std::mem::swap(&mut c.sensor[t], &mut d.sensor[t]);
        }
        if rng.gen_bool(0.5) {
            std::mem::swap(&mut c.rank[t], &mut d.rank[t]);
        }
        if rng.gen_bool(0.5) {
            std::mem::swap(&mut c.profile[t], &mut d.profile[t]);
        }
    }
    for u in 0..a.n_uavs() {
        if rng.gen_bool(0.5) {
            std::mem::swap(&mut c.gcs[u], &mut d.gcs[u]);
        }
        if rng.gen_bool(0.5) {
            std::mem::swap(&mut c.return_profile[u], &mut d.return_profile[u]);
        }
    }
    (c, d)
}

fn mutate(ctx: &PlanContext, g: &mut PlanGenome, rate: f64, rng: &mut ChaCha8Rng) {
    let n = g.n_tasks();
    for t in 0..n {
        if ctx.is_frozen(t) {
            continue;
        }
        if rng.gen_bool(rate) {
            g.randomize_task(ctx, t, rng);
        }
        if rng.gen_bool(rate) && n > 1 {
            let o = rng.gen_range(0..n);
            g.rank.swap(t, o);
        }
        if rng.gen_bool(rate) {
            g.profile[t] = *ctx.profiles.choose(rng).expect("non-empty");
        }
        if rng.gen_bool(rate) {
            let opts = ctx.usable_sensors(t);
            if let Some(&s) = opts.choose(rng) {
                g.sensor[t] = s;
                // the vehicles are fixed up by repair
                if let Assignment::Uavs(u) = &mut g.assignment[t] {
                    u.retain(|x| ctx.carriers(t, s).contains(x));
                }
            }
        }
    }
    for u in 0..g.n_uavs() {
        if rng.gen_bool(rate) {
            g.gcs[u] = ctx.gcs_options(u).choose(rng).copied();
        }
        if rng.gen_bool(rate) {
            g.return_profile[u] = *ctx.profiles.choose(rng).expect("non-empty");
        }
    }
}

fn search(
    ctx: &PlanContext,
    cfg: &SearchConfig,
    seeds: Vec<PlanGenome>,
    hooks: Hooks,
) -> Result<PlannerResult, MoeaError> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.population;
    let mut genomes: Vec<PlanGenome> = seeds.into_iter().take(n).collect();
    while genomes.len() < n {
        genomes.push(PlanGenome::random(ctx, &mut rng));
    }
    let mut pop = assess_all(ctx, genomes)?;
    let mut evaluations = pop.len();
    let mut seen_failures: BTreeMap<ReasonCode, usize> = BTreeMap::new();
    let mut tally = |batch: &[Individual]| {
        for v in batch.iter().flat_map(|i| &i.sol.check.violations) {
            *seen_failures.entry(v.reason).or_default() += 1;
        }
    };
    tally(&pop);
    let mut fronts = rank_population(&mut pop);
    let mut generation = 0;
    let report = |generation: usize, evaluations: usize, pop: &[Individual], fronts: &[Vec<usize>]| {
        if let Some(cb) = hooks.progress {
            cb(&Progress {
                generation,
                evaluations,
                feasible: pop.iter().filter(|i| i.feasible()).count(),
                front: fronts.first().map_or(0, |f| f.iter().filter(|&&i| pop[i].feasible()).count()),
                elapsed_s: started.elapsed().as_secs_f64(),
            });
        }
    };
    report(generation, evaluations, &pop, &fronts);
    let rate = cfg.mutation_rate.unwrap_or(1.0 / gene_count(&pop[0].sol.genome) as f64);
    let mut canceled = false;
    loop {
        if cfg.max_generations.is_some_and(|m| generation >= m) {
            break;
        }
        if started.elapsed().as_secs_f64() >= cfg.runtime_s {
            break;
        }
        if hooks.canceled() {
            canceled = true;
            break;
        }
        let mut kids = Vec::with_capacity(n);
        while kids.len() < n {
            let a = &tournament(&pop, &mut rng).sol.genome;
            let b = &tournament(&pop, &mut rng).sol.genome;
            let (mut c, mut d) =
                if rng.gen_bool(cfg.crossover_rate) { crossover(a, b, &mut rng) } else { (a.clone(), b.clone()) };
            for k in [&mut c, &mut d] {
                mutate(ctx, k, rate, &mut rng);
                k.repair(ctx, &mut rng);
            }
            kids.push(c);
            kids.push(d);
        }
        let kids = assess_all(ctx, kids)?;
        evaluations += kids.len();
        tally(&kids);
        pop.extend(kids);
        let all_fronts = rank_population(&mut pop);
        let mut keep: Vec<usize> = Vec::with_capacity(n);
        for f in &all_fronts {
            if keep.len() + f.len() <= n {
                keep.extend(f);
            } else {
                let mut f = f.clone();
                f.sort_by(|&a, &b| pop[b].crowd.total_cmp(&pop[a].crowd).then(a.cmp(&b)));
                keep.extend(&f[..n - keep.len()]);
                break;
            }
        }
        keep.sort_unstable();
        let mut slots: Vec<Option<Individual>> = pop.into_iter().map(Some).collect();
        pop = keep.iter().map(|&i| slots[i].take().expect("kept once")).collect();
        fronts = rank_population(&mut pop);
        generation += 1;
        report(generation, evaluations, &pop, &fronts);
    }

    let mut front: Vec<&Individual> =
        fronts.first().map(|f| f.iter().map(|&i| &pop[i]).filter(|i| i.feasible()).collect()).unwrap_or_default();
    let mut seen = std::collections::HashSet::new();
    front.retain(|i| seen.insert(i.sol.genome.clone()));
    let mut solutions: Vec<Solution> = front.iter().map(|i| i.sol.clone()).collect();
    if cfg.knee && solutions.len() > 1 {
        let pts: Vec<Vec<f64>> = solutions.iter().map(|s| s.objectives().to_vec()).collect();
        let keep = knee_points(&pts);
        solutions = keep.into_iter().map(|k| solutions[k].clone()).collect();
    }
    let histogram = if solutions.is_empty() {
        let mut h: Vec<(ReasonCode, usize)> = seen_failures.into_iter().collect();
        h.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.as_str().cmp(b.0.as_str())));
        h
    } else {
        Vec::new()
    };
    Ok(PlannerResult {
        solutions,
        histogram,
        generations: generation,
        evaluations,
        wall_time_s: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
        runtime_s: cfg.runtime_s,
        canceled,
    })
}

/// Extremes and knees of a front of minimisation vectors, as sorted indices.
///
/// Objectives are normalised to [0, 1] over the front. Every per-objective
/// minimiser is kept, plus each point lying farther than the mean on the
/// origin side of the hyperplane through those extremes. Never empty for a
/// non-empty front.
pub fn knee_points(front: &[Vec<f64>]) -> Vec<usize> {
    let n = front.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let d = front[0].len();
    let mut norm = vec![vec![0.0; d]; n];
    for j in 0..d {
        let lo = front.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
        let hi = front.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            norm[i][j] = if hi > lo { (front[i][j] - lo) / (hi - lo) } else { 0.0 };
        }
    }
    let sum = |i: usize| norm[i].iter().sum::<f64>();
    let mut extremes: Vec<usize> = (0..d)
        .map(|j| {
            (0..n)
                .min_by(|&a, &b| norm[a][j].total_cmp(&norm[b][j]).then(sum(a).total_cmp(&sum(b))).then(a.cmp(&b)))
                .expect("non-empty")
        })
        .collect();
    extremes.sort_unstable();
    extremes.dedup();

    // hyperplane a·x = 1 through the extremes (least squares, minimum norm)
    let e = DMatrix::from_fn(extremes.len(), d, |r, c| norm[extremes[r]][c]);
    let ones = DVector::from_element(extremes.len(), 1.0);
    let a = e.svd(true, true).solve(&ones, 1e-12).ok();
    let mut keep = extremes.clone();
    if let Some(a) = a.filter(|a| a.norm() > 1e-12) {
        let len = a.norm();
        let dist: Vec<f64> = (0..n).map(|i| (1.0 - (0..d).map(|j| a[j] * norm[i][j]).sum::<f64>()) / len).collect();
        let mean = dist.iter().sum::<f64>() / n as f64;
        keep.extend((0..n).filter(|&i| dist[i] > mean && dist[i] > 1e-12));
    }
    keep.sort_unstable();
    keep.dedup();
    keep
}

/// [`knee_points`] over evaluation reports.
pub fn knee_filter(front: &[&EvaluationReport]) -> Vec<usize> {
    let pts: Vec<Vec<f64>> = front.iter().map(|r| r.objective_vector().to_vec()).collect();
    knee_points(&pts)
}
