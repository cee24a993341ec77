mod common;

use std::sync::OnceLock;

use common::*;
use serde_json::json;
use skyplan_core::csp::check;
use skyplan_core::geo::geodesic_distance;
use skyplan_core::mission::parse_objective;
use skyplan_core::moea::{plan, Hooks, SearchConfig};
use skyplan_core::plan::{decode_schedule, evaluate, Assignment, PlanContext, PlanGenome, Schedule};
use skyplan_core::sim::{events_to_jsonl, EventKind, SimError, SimState, TaskStatus, UavStatus, DEFAULT_DT};

fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// A feasible use-case-1 plan, computed once.
fn uc1_plan() -> &'static (PlanGenome, Schedule) {
    static P: OnceLock<(PlanGenome, Schedule)> = OnceLock::new();
    P.get_or_init(|| {
        let ctx = usecase1_ctx();
        let cfg = SearchConfig { population: 32, max_generations: Some(15), ..SearchConfig::plan(60.0, 3) };
        let res = plan(&ctx, &cfg, Hooks::default()).unwrap();
        let s = &res.solutions[0];
        (s.genome.clone(), s.schedule.clone())
    })
}

fn uc1_sim() -> SimState {
    SimState::start(&usecase1(), &uc1_plan().1).unwrap()
}

#[test]
fn start_is_all_parked_and_pending() {
    let s = uc1_sim();
    assert_eq!(s.clock, 0.0);
    assert!(s.uavs.iter().all(|u| u.status == UavStatus::Parked));
    assert!(s.task_status.iter().all(|t| *t == TaskStatus::Pending));
    assert!(s.events.is_empty());
}

#[test]
fn start_rejects_foreign_schedule() {
    let (_, sched) = uc1_plan();
    let m = mission(vec![urav("U1", 36.78, -2.36)], vec![photo("A", 36.79, -2.33)], json!({}));
    assert!(matches!(SimState::start(&m, sched), Err(SimError::Mismatch(_))));
}

#[test]
fn first_leg_heads_for_runway_end() {
    let mut u = urav("U1", 36.78, -2.36);
    u["departureRunwayEnd"] = json!({ "lat": 36.78, "lon": -2.35 });
    let m = mission(vec![u], vec![photo("A", 36.83, -2.30)], json!({}));
    let ctx = PlanContext::new(m.clone(), flat_grid(0.0)).unwrap();
    let mut rng = rng(1);
    let mut g = PlanGenome::random(&ctx, &mut rng);
    g.assignment[0] = Assignment::Uavs(vec![0]);
    let sched = decode_schedule(&ctx, &g).unwrap();
    let mut sim = SimState::start(&m, &sched).unwrap();
    sim.run_to_end(DEFAULT_DT).unwrap();
    let first = sim.events.iter().find(|e| e.kind == EventKind::WaypointPassed).unwrap();
    let lat = first.detail["position"]["lat"].as_f64().unwrap();
    let lon = first.detail["position"]["lon"].as_f64().unwrap();
    assert!((lat - 36.78).abs() < 1e-9 && (lon + 2.35).abs() < 1e-9, "{first:?}");
}

#[test]
fn empty_schedule_is_finished_at_once() {
    let m = mission(vec![urav("U1", 36.78, -2.36)], vec![photo("A", 36.79, -2.33)], json!({}));
    let ctx = PlanContext::new(m.clone(), flat_grid(0.0)).unwrap();
    let mut rng = rng(1);
    let mut g = PlanGenome::random(&ctx, &mut rng);
    g.assignment[0] = Assignment::Omitted;
    let sched = decode_schedule(&ctx, &g).unwrap();
    let s = SimState::start(&m, &sched).unwrap();
    assert!(s.is_finished());
}

#[test]
fn step_advances_speed_times_dt() {
    let mut s = uc1_sim();
    let u = 0;
    let seg = *s.uavs[u].track().iter().find(|g| g.duration() > 30.0 && g.length_m > 0.0).unwrap();
    s.advance_to(seg.t0 + 5.0, DEFAULT_DT).unwrap();
    let before = s.uavs[u].flown_m;
    s.tick(10.0).unwrap();
    let moved = s.uavs[u].flown_m - before;
    assert!((moved - seg.speed_mps * 10.0).abs() < 1e-6, "{moved} vs {}", seg.speed_mps * 10.0);
}

#[test]
fn ticks_compose() {
    let mut a = uc1_sim();
    let mut b = uc1_sim();
    a.tick(1234.5).unwrap();
    b.tick(1000.0).unwrap();
    b.tick(234.5).unwrap();
    for (x, y) in a.uavs.iter().zip(&b.uavs) {
        assert!(geodesic_distance(&x.position, &y.position) < 1e-6);
        assert!((x.fuel_kg - y.fuel_kg).abs() < 1e-9);
        assert_eq!(x.status, y.status);
    }
    assert_eq!(a.task_status, b.task_status);
}

#[test]
fn fuel_matches_prediction() {
    let (_, sched) = uc1_plan();
    let mut s = uc1_sim();
    s.run_to_end(DEFAULT_DT).unwrap();
    for (u, p) in s.uavs.iter().zip(&sched.uavs) {
        let burned = u.fuel_load_kg - u.fuel_kg;
        let predicted = p.fuel_burned();
        assert!((burned - predicted).abs() <= 1e-3 * predicted.max(1e-9), "{}: {burned} vs {predicted}", u.name);
        if p.is_used() {
            assert_eq!(u.status, UavStatus::Landed);
            assert!(geodesic_distance(&u.position, &p.segments.last().unwrap().to) < 1e-6);
        }
    }
    assert!(s.task_status.iter().zip(&sched.tasks).all(|(st, r)| r.is_none() || *st == TaskStatus::Done));
}

#[test]
fn event_log_is_reproducible() {
    let run = || {
        let mut s = uc1_sim();
        s.advance_to(600.0, DEFAULT_DT).unwrap();
        let o = parse_objective(&fixture_text("inject_oil_leak.json"), &s.mission).unwrap();
        s.inject_objective(o).unwrap();
        s.run_to_end(DEFAULT_DT).unwrap();
        events_to_jsonl(&s.events)
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.contains("\"task_completed\"") && a.contains("\"objective_injected\""));
    let mut last = f64::NEG_INFINITY;
    for line in a.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let t = v["t"].as_f64().unwrap();
        assert!(t >= last);
        last = t;
    }
}

#[test]
fn task_status_only_moves_forward() {
    let mut s = uc1_sim();
    let rank = |t: TaskStatus| match t {
        TaskStatus::Pending => 0,
        TaskStatus::Active => 1,
        TaskStatus::Done => 2,
        TaskStatus::Obsolete => 3,
    };
    let mut prev = s.task_status.clone();
    let mut fuel: Vec<f64> = s.uavs.iter().map(|u| u.fuel_kg).collect();
    while !s.is_finished() {
        s.tick(7.0).unwrap();
        for (a, b) in prev.iter().zip(&s.task_status) {
            assert!(rank(*b) >= rank(*a) && *b != TaskStatus::Obsolete);
        }
        for (f, u) in fuel.iter().zip(&s.uavs) {
            assert!(u.fuel_kg <= *f);
        }
        prev = s.task_status.clone();
        fuel = s.uavs.iter().map(|u| u.fuel_kg).collect();
    }
}

#[test]
fn injection_keeps_trajectories() {
    let mut a = uc1_sim();
    let mut b = uc1_sim();
    a.advance_to(300.0, DEFAULT_DT).unwrap();
    b.advance_to(300.0, DEFAULT_DT).unwrap();
    let o = parse_objective(&fixture_text("inject_oil_leak.json"), &b.mission).unwrap();
    b.inject_objective(o.clone()).unwrap();
    let view = b.view();
    let t = view.tasks.iter().find(|t| t.id.starts_with("Oil Leaks/")).unwrap();
    assert_eq!(t.status, TaskStatus::Pending);
    assert!(!t.assigned);
    a.advance_to(900.0, DEFAULT_DT).unwrap();
    b.advance_to(900.0, DEFAULT_DT).unwrap();
    for (x, y) in a.uavs.iter().zip(&b.uavs) {
        assert_eq!(x.position, y.position);
    }
    assert!(b.inject_objective(o).is_err());
    let snap = b.snapshot_at(10.0).unwrap();
    assert!(snap.mission.objective_index("Oil Leaks").is_some());
}

#[test]
fn zero_delta_snapshot_is_identity() {
    let mut s = uc1_sim();
    s.advance_to(700.0, DEFAULT_DT).unwrap();
    let snap = s.snapshot_at(0.0).unwrap();
    assert_eq!(snap.snapshot_time, s.clock);
    assert_eq!(snap.tasks, s.task_status);
    for (a, b) in snap.uavs.iter().zip(&s.uavs) {
        assert_eq!(a.position, b.position);
        assert_eq!(a.fuel_kg, b.fuel_kg);
        assert_eq!(a.status, b.status);
    }
}

#[test]
fn snapshot_does_not_disturb_state() {
    let mut a = uc1_sim();
    let mut b = uc1_sim();
    a.advance_to(500.0, DEFAULT_DT).unwrap();
    b.advance_to(500.0, DEFAULT_DT).unwrap();
    let _ = b.snapshot_at(1000.0).unwrap();
    assert_eq!(a, b);
    a.advance_to(2000.0, DEFAULT_DT).unwrap();
    b.advance_to(2000.0, DEFAULT_DT).unwrap();
    assert_eq!(a, b);
}

#[test]
fn snapshot_lands_at_right_arc_length() {
    let (_, sched) = uc1_plan();
    let s = uc1_sim();
    let p = sched.uavs.iter().find(|p| p.segments.len() > 4).unwrap();
    // midway through the third non-hold segment
    let seg = p.segments.iter().filter(|g| g.length_m > 0.0).nth(2).unwrap();
    let at = seg.t0 + 0.4 * seg.duration();
    let snap = s.snapshot_at(at).unwrap();
    let u = &snap.uavs[p.uav];
    let flown: f64 = p.segments.iter().filter(|g| g.t1 <= seg.t0).map(|g| g.length_m).sum::<f64>() + 0.4 * seg.length_m;
    assert!((u.start.flown_m - flown).abs() < 1e-6, "{} vs {flown}", u.start.flown_m);
    let horiz = geodesic_distance(&seg.from, &seg.to);
    let d_from = geodesic_distance(&seg.from, &u.position);
    let d_to = geodesic_distance(&u.position, &seg.to);
    // positions interpolate linearly in lat/lon, a few cm off the geodesic
    assert!((d_from - 0.4 * horiz).abs() < 0.1 && (d_to - 0.6 * horiz).abs() < 0.1, "{d_from} {d_to} {horiz}");
}

#[test]
fn snapshot_past_end_saturates() {
    let (_, sched) = uc1_plan();
    let s = uc1_sim();
    let snap = s.snapshot_at(sched.makespan() + 100.0).unwrap();
    for (t, r) in snap.tasks.iter().zip(&sched.tasks) {
        if r.is_some() {
            assert_eq!(*t, TaskStatus::Done);
        }
    }
    for (u, p) in snap.uavs.iter().zip(&sched.uavs) {
        if let Some(last) = p.segments.last() {
            assert_eq!(u.status, UavStatus::Landed);
            assert!(geodesic_distance(&u.position, &last.to) < 1e-6);
            assert!(!u.start.airborne);
        }
    }
}

fn replan_ctx(s: &SimState, delta: f64) -> (skyplan_core::sim::SimSnapshot, PlanContext) {
    let snap = s.snapshot_at(delta).unwrap();
    let ctx = snap.plan_context(usecase1_grid()).unwrap();
    (snap, ctx)
}

#[test]
fn replaying_the_same_plan_changes_nothing_material() {
    let (genome, sched) = uc1_plan();
    let mut base = uc1_sim();
    base.run_to_end(DEFAULT_DT).unwrap();

    let mut s = uc1_sim();
    s.advance_to(1200.0, DEFAULT_DT).unwrap();
    let (snap, ctx) = replan_ctx(&s, 0.0);
    let g = PlanGenome::from_doc(&ctx, &genome.to_doc(&usecase1_ctx()), &mut rng(0));
    let new = decode_schedule(&ctx, &g).unwrap();
    s.apply_replacement(&snap, &new).unwrap();
    s.run_to_end(DEFAULT_DT).unwrap();
    // tasks left out of the plan turn obsolete at the switch
    let settled = |v: &[TaskStatus]| -> Vec<TaskStatus> {
        v.iter().map(|t| if *t == TaskStatus::Obsolete { TaskStatus::Pending } else { *t }).collect()
    };
    assert_eq!(settled(&s.task_status), settled(&base.task_status));
    for (t, r) in sched.tasks.iter().enumerate() {
        if let (Some(a), Some(b)) = (r, &s.records[t]) {
            assert!((a.end - b.end).abs() < 1.0, "task {t}: {} vs {}", a.end, b.end);
        }
    }
    for (a, b) in s.uavs.iter().zip(&base.uavs) {
        assert!((a.fuel_kg - b.fuel_kg).abs() <= 1e-3 * a.fuel_load_kg, "{}: {} vs {}", a.name, a.fuel_kg, b.fuel_kg);
    }
}

#[test]
fn stale_snapshot_is_refused() {
    let mut s = uc1_sim();
    s.advance_to(900.0, DEFAULT_DT).unwrap();
    let (snap, ctx) = replan_ctx(&s, 0.0);
    let mut later = s.clone();
    later.advance_to(1500.0, DEFAULT_DT).unwrap();
    // some other plan: fine right away, refused once the vehicles moved on
    let mut refused = 0;
    for seed in 0..10 {
        let new = decode_schedule(&ctx, &PlanGenome::random(&ctx, &mut rng(seed))).unwrap();
        s.clone().apply_replacement(&snap, &new).unwrap();
        let mut stale = later.clone();
        if let Err(e) = stale.apply_replacement(&snap, &new) {
            assert!(matches!(e, SimError::Drift { .. }));
            assert_eq!(stale, later);
            refused += 1;
        }
    }
    assert!(refused > 0);
}

#[test]
fn replan_covers_injected_objectives() {
    let (genome, sched) = uc1_plan();
    let mut s = uc1_sim();
    s.advance_to(1200.0, DEFAULT_DT).unwrap();
    for f in ["inject_oil_leak.json", "inject_new_photo.json"] {
        let o = parse_objective(&fixture_text(f), &s.mission).unwrap();
        s.inject_objective(o).unwrap();
    }
    let (snap, ctx) = replan_ctx(&s, 10.0);
    let cfg = SearchConfig { population: 32, max_generations: Some(30), ..SearchConfig::replan(60.0, 5) };
    let prev = genome.to_doc(&usecase1_ctx());
    let res = skyplan_core::moea::replan(&ctx, &prev, &cfg, Hooks::default()).unwrap();
    assert!(!res.solutions.is_empty(), "{:?}", res.histogram);
    let best = &res.solutions[0];
    let rep = evaluate(&ctx, &best.schedule).unwrap();
    assert!(check(&ctx, &best.schedule, &rep).valid);
    for name in ["Oil Leaks", "New Photo"] {
        let o = ctx.mission.objective_index(name).unwrap();
        for t in ctx.tasks.by_objective[o].clone() {
            assert!(best.schedule.tasks[t].is_some(), "{name} not covered");
        }
    }
    for (t, st) in snap.tasks.iter().enumerate() {
        if *st == TaskStatus::Done {
            let old = sched.tasks[t].as_ref().unwrap();
            let new = best.schedule.tasks[t].as_ref().unwrap();
            assert_eq!(&skyplan_core::plan::TaskRecord { frozen: true, ..old.clone() }, new);
        }
    }
    s.apply_replacement(&snap, &best.schedule).unwrap();
    s.run_to_end(DEFAULT_DT).unwrap();
    for name in ["Oil Leaks", "New Photo"] {
        let o = s.mission.objective_index(name).unwrap();
        for t in s.tasks.by_objective[o].clone() {
            assert_eq!(s.task_status[t], TaskStatus::Done);
        }
    }
    assert!(s.events.iter().any(|e| e.kind == EventKind::PlanSwitched));
}
