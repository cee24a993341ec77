mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use skyplan_core::geo::{ground_clearance_profile, GeoPoint, LocalFrame};
use skyplan_core::mission::{ProfileKind, TimeWindow};
use skyplan_core::plan::*;

fn genome_for(ctx: &PlanContext, assign: &[Option<Vec<usize>>]) -> PlanGenome {
    let n = ctx.n_tasks();
    let m = ctx.n_uavs();
    PlanGenome {
        assignment: assign
            .iter()
            .map(|a| match a {
                Some(u) => Assignment::Uavs(u.clone()),
                None => Assignment::Omitted,
            })
            .collect(),
        rank: (0..n as u32).collect(),
        profile: vec![ProfileKind::MinConsumption; n],
        sensor: vec![0; n],
        gcs: vec![Some(0); m],
        return_profile: vec![ProfileKind::MinConsumption; m],
    }
}

fn one_urav_one_photo() -> PlanContext {
    let m = mission(vec![urav("U", 36.77, -2.25)], vec![photo("P", 36.80, -2.30)], json!({}));
    PlanContext::new(m, flat_grid(0.0)).unwrap()
}

#[test]
fn single_point_task_starts_on_arrival() {
    let ctx = one_urav_one_photo();
    let s = decode_schedule(&ctx, &genome_for(&ctx, &[Some(vec![0])])).unwrap();
    assert!(s.converged);
    let plan = &s.uavs[0];
    assert_eq!(plan.departure(), Some(0.0));
    let rec = s.tasks[0].as_ref().unwrap();
    assert_eq!(rec.waits, vec![0.0]);
    assert_eq!(rec.start, rec.arrivals[0]);
    assert!((rec.end - rec.start - 60.0).abs() < 1e-9);
    assert_eq!(plan.legs[0].departure, 0.0);
    assert!(s.makespan() >= rec.end);
}

#[test]
fn early_arrival_waits_exactly_until_window_start() {
    let ctx = one_urav_one_photo();
    let g = genome_for(&ctx, &[Some(vec![0])]);
    let arrival = decode_schedule(&ctx, &g).unwrap().tasks[0].as_ref().unwrap().arrivals[0];

    let mut m = ctx.mission.clone();
    m.objectives[0].time_window = Some(TimeWindow::new(arrival + 100.0, arrival + 5000.0));
    let ctx = PlanContext::new(m, flat_grid(0.0)).unwrap();
    let s = decode_schedule(&ctx, &g).unwrap();
    let rec = s.tasks[0].as_ref().unwrap();
    assert!((rec.waits[0] - 100.0).abs() < 1e-9, "wait {}", rec.waits[0]);
    assert!((rec.start - (arrival + 100.0)).abs() < 1e-9);
    assert!((s.uavs[0].legs[0].wait_s - 100.0).abs() < 1e-9);
    let holds: f64 = s.uavs[0].segments.iter().filter(|x| x.phase == Phase::Wait).map(|x| x.duration()).sum();
    assert!((holds - 100.0).abs() < 1e-9);
}

#[test]
fn usecase1_surveillance_precedes_photo() {
    let ctx = usecase1_ctx();
    let survey = ctx.tasks.index_of("Search Area/survey").unwrap();
    let photo = ctx.tasks.index_of("Target Photo/photograph").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for _ in 0..150 {
        let g = PlanGenome::random(&ctx, &mut rng);
        let s = decode_schedule(&ctx, &g).unwrap();
        if !s.converged {
            continue;
        }
        let a = s.tasks[survey].as_ref().unwrap();
        let b = s.tasks[photo].as_ref().unwrap();
        assert!(a.end + 60.0 <= b.start + 1e-6, "{} + 60 > {}", a.end, b.start);
        checked += 1;
    }
    assert!(checked > 50);
}

#[test]
fn fuel_is_rate_times_time() {
    let ctx = one_urav_one_photo();
    let p = GeoPoint::with_alt(36.80, -2.30, 600.0);
    let seg = Segment {
        t0: 0.0,
        t1: 1800.0,
        from: p,
        to: p,
        kind: SegmentKind::Hold,
        phase: Phase::Wait,
        profile: ProfileKind::MinConsumption,
        speed_mps: 0.0,
        fuel_rate_kg_s: 100.0 / 3600.0,
        length_m: 0.0,
        task: None,
        terminal: false,
    };
    let s = Schedule {
        uavs: vec![UavPlan {
            uav: 0,
            gcs: Some(0),
            tasks: vec![],
            legs: vec![],
            segments: vec![seg],
            start: ctx.starts[0],
        }],
        tasks: vec![None],
        origin: 0.0,
        converged: true,
        iterations: 1,
    };
    let r = evaluate(&ctx, &s).unwrap();
    assert!((r.objectives.fuel_kg - 50.0).abs() < 1e-9);
    assert!((r.objectives.flight_time_s - 1800.0).abs() < 1e-9);
}

#[test]
fn two_identical_uavs_double_cost_not_makespan() {
    let one = mission(vec![urav("A", 36.77, -2.25)], vec![photo("P", 36.80, -2.30)], json!({}));
    let two = mission(
        vec![urav("A", 36.77, -2.25), urav("B", 36.77, -2.25)],
        vec![photo("P", 36.80, -2.30), photo("Q", 36.80, -2.30)],
        json!({}),
    );
    let c1 = PlanContext::new(one, flat_grid(0.0)).unwrap();
    let c2 = PlanContext::new(two, flat_grid(0.0)).unwrap();
    let r1 = evaluate(&c1, &decode_schedule(&c1, &genome_for(&c1, &[Some(vec![0])])).unwrap()).unwrap();
    let g2 = genome_for(&c2, &[Some(vec![0]), Some(vec![1])]);
    let r2 = evaluate(&c2, &decode_schedule(&c2, &g2).unwrap()).unwrap();
    assert!((r2.objectives.cost - 2.0 * r1.objectives.cost).abs() < 1e-9);
    assert!((r2.objectives.fuel_kg - 2.0 * r1.objectives.fuel_kg).abs() < 1e-9);
    assert_eq!(r2.objectives.makespan_s, r1.objectives.makespan_s);
    assert_eq!(r2.objectives.n_uavs, 2);
    assert_eq!(r2.objectives.n_gcss, 1);
    // same path at the same time
    assert_eq!(r2.min_separation_m, Some(0.0));
    assert_eq!(r2.risks.closeness, 100.0);
}

#[test]
fn min_clearance_matches_clearance_profile() {
    let ctx = usecase1_ctx();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let g = PlanGenome::random(&ctx, &mut rng);
        let s = decode_schedule(&ctx, &g).unwrap();
        let r = evaluate(&ctx, &s).unwrap();
        let mut best = f64::INFINITY;
        for p in &s.uavs {
            // contiguous runs of en-route segments as polylines
            let mut run: Vec<GeoPoint> = Vec::new();
            let mut flush = |run: &mut Vec<GeoPoint>| {
                for c in ground_clearance_profile(&ctx.grid, run, 100.0).unwrap() {
                    best = best.min(c.clearance());
                }
                run.clear();
            };
            for seg in &p.segments {
                if seg.terminal {
                    flush(&mut run);
                    continue;
                }
                if run.is_empty() {
                    run.push(seg.from);
                }
                if seg.to != *run.last().unwrap() {
                    run.push(seg.to);
                }
            }
            flush(&mut run);
        }
        let got = r.min_clearance_m.unwrap();
        assert!((got - best).abs() < 1e-9, "{got} vs {best}");
    }
}

#[test]
fn closest_approach_of_crossing_tracks() {
    // A heads east at 100 m/s from (-1000, 0, 500); B heads north at 100 m/s
    // from (0, -1000, 600). They pass 100 m apart at t = 10.
    let (t, d) = closest_approach([1000.0, -1000.0, 100.0], [-100.0, 100.0, 0.0], 60.0);
    assert!((t - 10.0).abs() < 1e-12);
    assert!((d - 100.0).abs() < 1e-12);
    // window ends before the closest point
    let (t, d) = closest_approach([1000.0, -1000.0, 100.0], [-100.0, 100.0, 0.0], 5.0);
    assert_eq!(t, 5.0);
    assert!((d - (500.0f64.powi(2) * 2.0 + 100.0 * 100.0).sqrt()).abs() < 1e-9);
}

fn straight(ctx: &PlanContext, uav: usize, from: GeoPoint, to: GeoPoint, t1: f64) -> UavPlan {
    UavPlan {
        uav,
        gcs: Some(0),
        tasks: vec![],
        legs: vec![],
        segments: vec![Segment {
            t0: 0.0,
            t1,
            from,
            to,
            kind: SegmentKind::Cruise,
            phase: Phase::Transit,
            profile: ProfileKind::MinConsumption,
            speed_mps: 100.0,
            fuel_rate_kg_s: 0.001,
            length_m: 2000.0,
            task: None,
            terminal: false,
        }],
        start: ctx.starts[uav],
    }
}

#[test]
fn separation_of_crossing_schedules_matches_closed_form() {
    let m = mission(vec![urav("A", 36.77, -2.25), urav("B", 36.77, -2.20)], vec![photo("P", 36.80, -2.30)], json!({}));
    let ctx = PlanContext::new(m, flat_grid(0.0)).unwrap();
    let frame = LocalFrame::new(&ctx.mission.bounds.center());
    let at = |x: f64, y: f64, z: f64| frame.unproject((x, y)).at_alt(z);
    let a = straight(&ctx, 0, at(-1000.0, 0.0, 500.0), at(1000.0, 0.0, 500.0), 20.0);
    let b = straight(&ctx, 1, at(0.0, -1000.0, 600.0), at(0.0, 1000.0, 600.0), 20.0);
    let s = Schedule { uavs: vec![a, b], tasks: vec![None], origin: 0.0, converged: true, iterations: 1 };
    let d = min_separation(&ctx, &s).unwrap();
    assert!((d - 100.0).abs() < 1e-6, "{d}");
    // 100 m is below sepMin (150 m)
    assert_eq!(closeness_risk(&ctx, &s).unwrap(), 100.0);
}

#[test]
fn closeness_endpoints() {
    let m = mission(vec![urav("A", 36.77, -2.25), urav("B", 36.77, -2.20)], vec![photo("P", 36.80, -2.30)], json!({}));
    let ctx = PlanContext::new(m, flat_grid(0.0)).unwrap();
    let frame = LocalFrame::new(&ctx.mission.bounds.center());
    let at = |x: f64, y: f64| frame.unproject((x, y)).at_alt(500.0);
    // parallel tracks exactly sepRisked apart
    let a = straight(&ctx, 0, at(-1000.0, 0.0), at(1000.0, 0.0), 20.0);
    let b = straight(&ctx, 1, at(-1000.0, 1000.0), at(1000.0, 1000.0), 20.0);
    let s = Schedule { uavs: vec![a.clone(), b], tasks: vec![None], origin: 0.0, converged: true, iterations: 1 };
    assert!(closeness_risk(&ctx, &s).unwrap().abs() < 1e-6);
    let solo = Schedule { uavs: vec![a], ..s };
    assert_eq!(min_separation(&ctx, &solo), None);
    assert_eq!(closeness_risk(&ctx, &solo).unwrap(), 0.0);
}

#[test]
fn risk_interp_endpoints_and_midpoints() {
    use RiskDirection::*;
    // ground clearance and separation: low values are risky
    for (lo, hi) in [(100.0, 300.0), (150.0, 1000.0)] {
        assert_eq!(risk_interp(lo, lo, hi, LowIsRisky).unwrap(), 100.0);
        assert_eq!(risk_interp(hi, lo, hi, LowIsRisky).unwrap(), 0.0);
        assert_eq!(risk_interp(lo - 1.0, lo, hi, LowIsRisky).unwrap(), 100.0);
        assert_eq!(risk_interp(hi + 1.0, lo, hi, LowIsRisky).unwrap(), 0.0);
        assert!((risk_interp((lo + hi) / 2.0, lo, hi, LowIsRisky).unwrap() - 50.0).abs() <= 1e-9);
    }
    // fuel usage and time out of coverage: high values are risky
    for (lo, hi) in [(50.0, 90.0), (0.0, 300.0)] {
        assert_eq!(risk_interp(hi, lo, hi, HighIsRisky).unwrap(), 100.0);
        assert_eq!(risk_interp(lo, lo, hi, HighIsRisky).unwrap(), 0.0);
        assert!((risk_interp((lo + hi) / 2.0, lo, hi, HighIsRisky).unwrap() - 50.0).abs() <= 1e-9);
    }
    assert!(matches!(risk_interp(1.0, 5.0, 5.0, HighIsRisky), Err(PlanError::InvalidInterval { .. })));
    assert!(risk_interp(1.0, 6.0, 5.0, LowIsRisky).is_err());
}

#[test]
fn decode_is_deterministic() {
    let ctx = usecase1_ctx();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let g = PlanGenome::random(&ctx, &mut rng);
        let a = decode_schedule(&ctx, &g).unwrap();
        let b = decode_schedule(&ctx, &g).unwrap();
        assert_eq!(a, b);
        assert_eq!(evaluate(&ctx, &a).unwrap(), evaluate(&ctx, &b).unwrap());
    }
}

#[test]
fn schedules_are_well_formed() {
    let ctx = usecase1_ctx();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..40 {
        let g = PlanGenome::random(&ctx, &mut rng);
        let s = decode_schedule(&ctx, &g).unwrap();
        for p in &s.uavs {
            for w in p.segments.windows(2) {
                assert!((w[0].t1 - w[1].t0).abs() < 1e-9, "segments must be contiguous");
                assert_eq!(w[0].to, w[1].from);
            }
            for seg in &p.segments {
                assert!(seg.t1 > seg.t0);
                for q in [seg.from, seg.to] {
                    assert!(!ctx.router.is_blocked(&q) || seg.terminal, "inside NFZ");
                }
            }
            if let (Some(first), Some(last)) = (p.segments.first(), p.segments.last()) {
                assert!(first.from.same_place(&ctx.mission.uavs[p.uav].position));
                assert!(last.to.same_place(&ctx.mission.uavs[p.uav].home()));
                assert!((last.to.alt.unwrap() - ctx.home_alt[p.uav]).abs() < 1e-6);
            }
        }
        let r = evaluate(&ctx, &s).unwrap();
        for v in r.objective_vector().iter().enumerate().filter(|(i, _)| *i != 6).map(|(_, v)| v) {
            assert!(v.is_finite() && *v >= 0.0);
        }
        for v in [r.risks.fuel, r.risks.ground, r.risks.coverage, r.risks.closeness] {
            assert!((0.0..=100.0).contains(&v));
        }
    }
}

#[test]
fn appending_a_task_never_reduces_fuel_or_flight_time() {
    let objectives =
        (0..6).map(|i| photo(&format!("P{i}"), 36.78 + 0.01 * i as f64, -2.38 + 0.03 * i as f64)).collect();
    let m = mission(vec![urav("A", 36.77, -2.25), urav("B", 36.775, -2.385)], objectives, json!({}));
    let ctx = PlanContext::new(m, usecase1_grid()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut tried = 0;
    for _ in 0..200 {
        let g = PlanGenome::random(&ctx, &mut rng);
        let omitted: Vec<usize> = (0..ctx.n_tasks()).filter(|&t| g.assignment[t].is_omitted()).collect();
        if omitted.is_empty() {
            continue;
        }
        let t = omitted[rng.gen_range(0..omitted.len())];
        let u = rng.gen_range(0..ctx.n_uavs());
        let before = evaluate(&ctx, &decode_schedule(&ctx, &g).unwrap()).unwrap();
        let mut h = g.clone();
        h.assignment[t] = Assignment::Uavs(vec![u]);
        // a faster cruise on the new leg could shorten the trip home
        h.profile[t] = h.return_profile[u];
        // move t to the end of every sequence
        let old = h.rank[t];
        for r in h.rank.iter_mut() {
            if *r > old {
                *r -= 1;
            }
        }
        h.rank[t] = ctx.n_tasks() as u32 - 1;
        let after = evaluate(&ctx, &decode_schedule(&ctx, &h).unwrap()).unwrap();
        let (b, a) = (&before.uavs[u], &after.uavs[u]);
        assert!(a.fuel_kg >= b.fuel_kg - 1e-9, "fuel {} < {}", a.fuel_kg, b.fuel_kg);
        assert!(a.flight_time_s >= b.flight_time_s - 1e-9);
        tried += 1;
    }
    assert!(tried > 50);
}

#[test]
fn undecodable_genome_names_the_gene() {
    let m = mission(
        vec![
            json!({ "name": "M", "type": "MALE", "fuel": 300, "position": { "lat": 36.775, "lon": -2.33 }, "sensors": ["SAR"] }),
            urav("U", 36.77, -2.25),
        ],
        vec![photo("P", 36.80, -2.30)],
        json!({}),
    );
    let ctx = PlanContext::new(m, flat_grid(0.0)).unwrap();
    let g = genome_for(&ctx, &[Some(vec![0])]);
    match decode_schedule(&ctx, &g) {
        Err(PlanError::Decode { gene, message }) => {
            assert_eq!(gene, "P/photograph.sensor");
            assert!(message.contains("EO/IR"), "{message}");
        }
        other => panic!("expected decode error, got {other:?}"),
    }
}

#[test]
fn genome_doc_roundtrip() {
    let ctx = usecase1_ctx();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let g = PlanGenome::random(&ctx, &mut rng);
        let doc = g.to_doc(&ctx);
        let text = serde_json::to_string(&doc).unwrap();
        let back: GenomeDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(PlanGenome::from_doc(&ctx, &back, &mut rng), g);
    }
}

#[test]
fn random_genomes_are_valid() {
    let ctx = usecase1_ctx();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let g = PlanGenome::random(&ctx, &mut rng);
        g.validate(&ctx).unwrap();
        for t in 0..ctx.n_tasks() {
            if ctx.tasks.tasks[t].mandatory {
                assert!(!g.assignment[t].is_omitted());
            }
        }
    }
}
