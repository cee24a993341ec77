mod common;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use common::*;
use serde_json::json;
use skyplan_core::csp::check;
use skyplan_core::mission::ProfileKind;
use skyplan_core::moea::{knee_points, plan, Hooks, MoeaError, PlannerResult, Progress, SearchConfig};
use skyplan_core::plan::{decode_schedule, evaluate, Assignment, PlanContext, PlanGenome};

fn tiny_ctx() -> PlanContext {
    let mut tasks = vec![photo("A", 36.79, -2.33), photo("B", 36.81, -2.26), photo("C", 36.83, -2.22)];
    for t in &mut tasks {
        t["mandatory"] = json!(true);
    }
    let m = mission(vec![urav("U1", 36.78, -2.36), urav("U2", 36.82, -2.20)], tasks, json!({}));
    PlanContext::new(m, flat_grid(0.0)).unwrap().with_profiles(&[ProfileKind::MinConsumption]).unwrap()
}

fn pareto_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Objective vectors of the exact feasible front, by enumerating every
/// assignment and every rank permutation.
fn exact_front(ctx: &PlanContext) -> Vec<[f64; 8]> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut pts: Vec<[f64; 8]> = Vec::new();
    for mask in 0..8u32 {
        for p in &perms {
            let g = PlanGenome {
                assignment: (0..3).map(|t| Assignment::Uavs(vec![((mask >> t) & 1) as usize])).collect(),
                rank: p.to_vec(),
                profile: vec![ProfileKind::MinConsumption; 3],
                sensor: vec![0; 3],
                gcs: vec![Some(0); 2],
                return_profile: vec![ProfileKind::MinConsumption; 2],
            };
            let s = decode_schedule(ctx, &g).unwrap();
            let r = evaluate(ctx, &s).unwrap();
            if check(ctx, &s, &r).valid {
                pts.push(r.objective_vector());
            }
        }
    }
    let front: Vec<[f64; 8]> = pts.iter().filter(|a| !pts.iter().any(|b| pareto_dominates(b, *a))).copied().collect();
    front
}

fn on_front(p: &[f64; 8], front: &[[f64; 8]]) -> bool {
    front.iter().any(|f| f.iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0)))
}

fn capped(generations: usize, seed: u64) -> SearchConfig {
    SearchConfig { population: 32, max_generations: Some(generations), ..SearchConfig::plan(60.0, seed) }
}

fn assert_sound(ctx: &PlanContext, res: &PlannerResult) {
    for s in &res.solutions {
        let sched = decode_schedule(ctx, &s.genome).unwrap();
        let rep = evaluate(ctx, &sched).unwrap();
        assert!(check(ctx, &sched, &rep).valid);
        assert!(s.check.valid);
    }
    for a in &res.solutions {
        for b in &res.solutions {
            assert!(!pareto_dominates(&a.objectives(), &b.objectives()));
        }
    }
}

#[test]
fn tiny_instance_front_lies_on_exact_front() {
    let ctx = tiny_ctx();
    let exact = exact_front(&ctx);
    assert!(!exact.is_empty());
    let mut contained = 0;
    for seed in 0..20 {
        let t0 = Instant::now();
        let cfg = SearchConfig { population: 32, max_generations: Some(40), ..SearchConfig::plan(4.5, seed) };
        let res = plan(&ctx, &cfg, Hooks::default()).unwrap();
        assert!(t0.elapsed().as_secs_f64() <= 5.0, "seed {seed} took {:?}", t0.elapsed());
        assert!(!res.solutions.is_empty());
        assert_sound(&ctx, &res);
        if res.solutions.iter().all(|s| on_front(&s.objectives(), &exact)) {
            contained += 1;
        }
    }
    assert!(contained >= 19, "{contained}/20 runs inside the exact front");
}

#[test]
fn knee_of_three_point_front() {
    let k = knee_points(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.2, 0.2]]);
    assert_eq!(k, vec![0, 1, 2]);
}

#[test]
fn knee_of_collinear_front_is_extremes() {
    let k = knee_points(&[vec![0.0, 1.0], vec![0.5, 0.5], vec![0.25, 0.75], vec![1.0, 0.0]]);
    assert_eq!(k, vec![0, 3]);
}

#[test]
fn knee_of_single_point() {
    assert_eq!(knee_points(&[vec![3.0, 4.0, 5.0]]), vec![0]);
}

#[test]
fn knee_skips_concave_side() {
    // (0.8, 0.8) bulges away from the origin
    let k = knee_points(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.8, 0.8], vec![0.45, 0.45]]);
    assert_eq!(k, vec![0, 1, 3]);
}

#[test]
fn config_is_validated() {
    let ctx = tiny_ctx();
    let bad = [
        SearchConfig { population: 3, ..SearchConfig::default() },
        SearchConfig { population: 7, ..SearchConfig::default() },
        SearchConfig { runtime_s: 0.0, ..SearchConfig::default() },
        SearchConfig { crossover_rate: 1.5, ..SearchConfig::default() },
        SearchConfig { mutation_rate: Some(-0.1), ..SearchConfig::default() },
    ];
    for cfg in bad {
        assert!(matches!(plan(&ctx, &cfg, Hooks::default()), Err(MoeaError::Config(_))));
    }
}

#[test]
fn fixed_seed_is_reproducible() {
    let ctx = tiny_ctx();
    let a = plan(&ctx, &capped(10, 7), Hooks::default()).unwrap();
    let b = plan(&ctx, &capped(10, 7), Hooks::default()).unwrap();
    assert_eq!(a.generations, 10);
    assert_eq!(a.solutions, b.solutions);
    assert_eq!(a.evaluations, b.evaluations);
}

#[test]
fn usecase1_short_run_is_sound() {
    let ctx = usecase1_ctx();
    let res = plan(&ctx, &capped(15, 3), Hooks::default()).unwrap();
    assert_sound(&ctx, &res);
    assert_eq!(res.seed, 3);
}

#[test]
fn runtime_limit_holds_within_one_generation() {
    let ctx = usecase1_ctx();
    let stamps = Mutex::new(Vec::new());
    let cb = |p: &Progress| stamps.lock().unwrap().push(p.elapsed_s);
    let hooks = Hooks { progress: Some(&cb), cancel: None };
    let t0 = Instant::now();
    let res = plan(&ctx, &SearchConfig::plan(2.0, 1), hooks).unwrap();
    let wall = t0.elapsed().as_secs_f64();
    let stamps = stamps.into_inner().unwrap();
    let slack = stamps.windows(2).map(|w| w[1] - w[0]).fold(stamps[0], f64::max);
    assert!(wall <= 2.0 + slack + 0.25, "wall {wall}, slack {slack}");
    assert!(res.wall_time_s <= wall);
    assert_eq!(stamps.len(), res.generations + 1);
}

#[test]
fn cancel_stops_between_generations() {
    let ctx = tiny_ctx();
    let flag = AtomicBool::new(false);
    let cb = |p: &Progress| {
        if p.generation == 3 {
            flag.store(true, Ordering::Relaxed);
        }
    };
    let hooks = Hooks { progress: Some(&cb), cancel: Some(&flag) };
    let res = plan(&ctx, &capped(100, 0), hooks).unwrap();
    assert!(res.canceled);
    assert_eq!(res.generations, 3);
}

#[test]
fn infeasible_mission_reports_histogram() {
    // half a kilo of fuel gets nobody to the target
    let mut u = urav("U1", 36.78, -2.36);
    u["fuel"] = json!(0.5);
    let mut t = photo("A", 36.83, -2.20);
    t["mandatory"] = json!(true);
    let ctx = PlanContext::new(mission(vec![u], vec![t], json!({})), flat_grid(0.0)).unwrap();
    let res = plan(&ctx, &capped(3, 0), Hooks::default()).unwrap();
    assert!(res.solutions.is_empty());
    assert_eq!(res.histogram[0].0.as_str(), "fuel_capacity");
}
