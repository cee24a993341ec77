use super::{
    LegRecord, Phase, PlanContext, PlanError, PlanGenome, Schedule, Segment, SegmentKind, TaskRecord, UavPlan,
};
use crate::geo::{geodesic_distance, GeoPoint};
use crate::mission::{AllenRelation, FlightProfile, ObjectiveGeometry, ProfileKind, VehicleType};

/// Margin used to satisfy strict interval relations when pushing start
/// bounds forward.
const STRICT_GAP_S: f64 = 1.0;
const SETTLED_EPS: f64 = 1e-9;

/// Decodes `g` into timed trajectories.
///
/// Each vehicle takes off as soon as it is available, flies its tasks in
/// rank order and loiters when it arrives before a task may start. Start
/// bounds coming from dependencies and from multi-vehicle synchronisation are
/// found by iterating to a fixed point; the schedule reports whether it
/// settled.
pub fn decode_schedule(ctx: &PlanContext, g: &PlanGenome) -> Result<Schedule, PlanError> {
    g.validate(ctx)?;
    let n = ctx.n_tasks();
    let seqs: Vec<Vec<usize>> = (0..ctx.n_uavs()).map(|u| g.sequence(ctx, u)).collect();
    let mut lb = vec![ctx.origin; n];
    let cap = 2 * n + 5;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let pass = run_pass(ctx, g, &seqs, &lb)?;
        let next = propagate(ctx, g, &pass, &lb);
        let settled = next.iter().zip(&lb).all(|(a, b)| (a - b).abs() <= SETTLED_EPS);
        if settled || iterations >= cap {
            return Ok(assemble(ctx, g, pass, settled, iterations));
        }
        lb = next;
    }
}

#[derive(Debug, Clone, Copy)]
struct Visit {
    arrival: f64,
    start: f64,
    end: f64,
}

struct Pass {
    plans: Vec<UavPlan>,
    /// Per task, per assigned UAV (in assignment order).
    visits: Vec<Vec<Visit>>,
}

impl Pass {
    fn interval(&self, ctx: &PlanContext, t: usize) -> Option<(f64, f64)> {
        if let Some(r) = &ctx.frozen[t] {
            return Some((r.start, r.end));
        }
        let v = &self.visits[t];
        if v.is_empty() {
            return None;
        }
        Some((
            v.iter().map(|x| x.start).fold(f64::NEG_INFINITY, f64::max),
            v.iter().map(|x| x.end).fold(f64::NEG_INFINITY, f64::max),
        ))
    }

    fn group_interval(&self, ctx: &PlanContext, group: &[usize]) -> Option<(f64, f64)> {
        let spans: Vec<(f64, f64)> = group.iter().filter_map(|&t| self.interval(ctx, t)).collect();
        if spans.is_empty() {
            return None;
        }
        Some((
            spans.iter().map(|s| s.0).fold(f64::INFINITY, f64::min),
            spans.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max),
        ))
    }
}

fn run_pass(ctx: &PlanContext, g: &PlanGenome, seqs: &[Vec<usize>], lb: &[f64]) -> Result<Pass, PlanError> {
    let n = ctx.n_tasks();
    let mut visits: Vec<Vec<Visit>> = vec![Vec::new(); n];
    let mut slots: Vec<Vec<(usize, Visit)>> = vec![Vec::new(); n];
    let mut plans = Vec::with_capacity(ctx.n_uavs());
    for (u, seq) in seqs.iter().enumerate() {
        let (plan, vs) = fly_uav(ctx, g, u, seq, lb)?;
        for (t, v) in vs {
            slots[t].push((u, v));
        }
        plans.push(plan);
    }
    for t in 0..n {
        let order = g.assignment[t].uavs();
        let mut vs = std::mem::take(&mut slots[t]);
        vs.sort_by_key(|(u, _)| order.iter().position(|x| x == u));
        visits[t] = vs.into_iter().map(|(_, v)| v).collect();
    }
    Ok(Pass { plans, visits })
}

fn propagate(ctx: &PlanContext, g: &PlanGenome, pass: &Pass, lb: &[f64]) -> Vec<f64> {
    let mut next = lb.to_vec();
    let raise = |next: &mut Vec<f64>, t: usize, v: f64| {
        if !ctx.is_frozen(t) && v > next[t] {
            next[t] = v;
        }
    };
    // vehicles sharing a task start together
    for t in 0..ctx.n_tasks() {
        if g.assignment[t].uavs().len() > 1 {
            if let Some(s) = pass.visits[t].iter().map(|v| v.start).reduce(f64::max) {
                raise(&mut next, t, s);
            }
        }
    }
    let starts: Vec<Option<f64>> = (0..ctx.n_tasks()).map(|t| pass.interval(ctx, t).map(|i| i.0)).collect();
    let push_group = |next: &mut Vec<f64>, group: &[usize], at_least: f64| {
        for &t in group {
            raise(next, t, at_least);
        }
    };
    let delay_group = |next: &mut Vec<f64>, group: &[usize], by: f64| {
        for &t in group {
            if let Some(s) = starts[t] {
                raise(next, t, s + by);
            }
        }
    };
    for d in &ctx.tasks.dependencies {
        let (Some((s1, e1)), Some((s2, e2))) =
            (pass.group_interval(ctx, &d.first), pass.group_interval(ctx, &d.second))
        else {
            continue;
        };
        let off = d.offset_s;
        match d.relation {
            AllenRelation::Before => push_group(&mut next, &d.second, e1 + off),
            AllenRelation::Meets => {
                push_group(&mut next, &d.second, e1);
                if s2 > e1 {
                    delay_group(&mut next, &d.first, s2 - e1);
                }
            }
            AllenRelation::Overlaps => push_group(&mut next, &d.second, s1 + off + STRICT_GAP_S),
            AllenRelation::During => push_group(&mut next, &d.first, s2 + off + STRICT_GAP_S),
            AllenRelation::Starts | AllenRelation::Equals => {
                if s1 < s2 {
                    push_group(&mut next, &d.first, s2);
                } else if s2 < s1 {
                    push_group(&mut next, &d.second, s1);
                }
            }
            AllenRelation::Finishes => {
                if e1 < e2 {
                    delay_group(&mut next, &d.first, e2 - e1);
                } else if e2 < e1 {
                    delay_group(&mut next, &d.second, e1 - e2);
                }
            }
        }
    }
    next
}

fn assemble(ctx: &PlanContext, g: &PlanGenome, pass: Pass, converged: bool, iterations: usize) -> Schedule {
    let tasks = (0..ctx.n_tasks())
        .map(|t| {
            if let Some(r) = &ctx.frozen[t] {
                return Some(r.clone());
            }
            let vs = &pass.visits[t];
            if vs.is_empty() {
                return None;
            }
            let (start, end) = pass.interval(ctx, t).expect("visited");
            Some(TaskRecord {
                task: t,
                uavs: g.assignment[t].uavs().to_vec(),
                sensor: ctx.tasks.tasks[t].sensors[g.sensor[t]].clone(),
                profile: g.profile[t],
                start,
                end,
                arrivals: vs.iter().map(|v| v.arrival).collect(),
                waits: vs.iter().map(|v| v.start - v.arrival).collect(),
                ends: vs.iter().map(|v| v.end).collect(),
                frozen: false,
            })
        })
        .collect();
    Schedule { uavs: pass.plans, tasks, origin: ctx.origin, converged, iterations }
}

/// Incremental trajectory writer for one vehicle.
struct Track<'a> {
    ctx: &'a PlanContext,
    vt: &'a VehicleType,
    t: f64,
    pos: GeoPoint,
    segs: Vec<Segment>,
}

impl<'a> Track<'a> {
    fn alt(&self) -> f64 {
        self.pos.alt.expect("track positions carry altitude")
    }

    /// Horizontal polyline from the current position through `via`,
    /// detouring around no-fly zones.
    fn path_via(&self, via: &[GeoPoint]) -> Result<Vec<GeoPoint>, PlanError> {
        let mut out = vec![GeoPoint::new(self.pos.lat, self.pos.lon)];
        for p in via {
            let last = *out.last().expect("non-empty");
            if last.same_place(p) {
                continue;
            }
            let r = self.ctx.router.route_points(&last, &GeoPoint::new(p.lat, p.lon))?;
            out.extend(r.iter().skip(1).map(|q| GeoPoint::new(q.lat, q.lon)));
        }
        Ok(out)
    }

    fn push(
        &mut self,
        to: GeoPoint,
        kind: SegmentKind,
        phase: Phase,
        prof: &FlightProfile,
        task: Option<usize>,
        terminal: bool,
    ) {
        let h = geodesic_distance(&self.pos, &to);
        let dz = to.alt.unwrap_or(0.0) - self.alt();
        let length = h.hypot(dz);
        if length <= 1e-9 {
            return;
        }
        let dt = length / prof.speed_mps;
        self.segs.push(Segment {
            t0: self.t,
            t1: self.t + dt,
            from: self.pos,
            to,
            kind,
            phase,
            profile: prof.kind,
            speed_mps: prof.speed_mps,
            fuel_rate_kg_s: prof.fuel_rate_kg_s,
            length_m: length,
            task,
            terminal,
        });
        self.t += dt;
        self.pos = to;
    }

    fn hold(&mut self, dur: f64, phase: Phase, task: Option<usize>) {
        if dur <= 0.0 {
            return;
        }
        let p = &self.vt.profiles.min_consumption;
        self.segs.push(Segment {
            t0: self.t,
            t1: self.t + dur,
            from: self.pos,
            to: self.pos,
            kind: SegmentKind::Hold,
            phase,
            profile: p.kind,
            speed_mps: 0.0,
            fuel_rate_kg_s: p.fuel_rate_kg_s,
            length_m: 0.0,
            task,
            terminal: false,
        });
        self.t += dur;
    }

    /// Flies `path` (starting at the current position) heading for the
    /// cruise altitude of `cruise`. Climb or descent happens at the start of
    /// the path; with `land_at` the vehicle also descends to that altitude by
    /// the end of the path, compressing the ramps if the path is short.
    fn fly(
        &mut self,
        path: &[GeoPoint],
        cruise: ProfileKind,
        phase: Phase,
        task: Option<usize>,
        takeoff: bool,
        land_at: Option<f64>,
    ) {
        let profiles = &self.vt.profiles;
        let cruise_p = profiles.get(cruise);
        let target = cruise_p.altitude_m.expect("cruise profile altitude");
        let tan_c = profiles.climb.angle_deg.expect("climb angle").to_radians().tan();
        let tan_d = profiles.descent.angle_deg.expect("descent angle").to_radians().tan();
        let a0 = self.alt();

        let mut cum = vec![0.0];
        for w in path.windows(2) {
            cum.push(cum.last().unwrap() + geodesic_distance(&w[0], &w[1]));
        }
        let total = *cum.last().unwrap();
        if total <= 1e-9 {
            if let Some(land) = land_at {
                let to = self.pos.at_alt(land);
                let kind = if land < a0 { SegmentKind::Descent } else { SegmentKind::Climb };
                let prof = if land < a0 { &profiles.descent } else { &profiles.climb };
                self.push(to, kind, phase, prof, task, true);
            }
            return;
        }

        let k = if target >= a0 { tan_c } else { -tan_d };
        let ramp = |s: f64| {
            let v = a0 + k * s;
            if k >= 0.0 {
                v.min(target)
            } else {
                v.max(target)
            }
        };
        let compressed = land_at.is_some_and(|land| a0 > land + total * tan_d);
        let alt_at = |s: f64| -> f64 {
            match land_at {
                None => ramp(s),
                Some(land) if compressed => a0 + (land - a0) * s / total,
                Some(land) => ramp(s).min(land + (total - s) * tan_d),
            }
        };
        let mut cuts: Vec<f64> = cum.clone();
        let d1 = (target - a0).abs() / k.abs();
        cuts.push(d1);
        if let Some(land) = land_at {
            if !compressed {
                cuts.push(total - (target - land) / tan_d);
                if (k + tan_d).abs() > 1e-12 {
                    cuts.push((land + total * tan_d - a0) / (k + tan_d));
                }
            }
        }
        cuts.retain(|s| s.is_finite() && *s >= 0.0 && *s <= total);
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-6);

        let point_at = |s: f64| -> GeoPoint {
            let i = cum.partition_point(|&c| c <= s).clamp(1, path.len() - 1);
            let seg = cum[i] - cum[i - 1];
            let f = if seg > 0.0 { ((s - cum[i - 1]) / seg).clamp(0.0, 1.0) } else { 1.0 };
            path[i - 1].lerp(&path[i], f)
        };
        let first = self.segs.len();
        for w in cuts.windows(2) {
            let (sa, sb) = (w[0], w[1]);
            if sb - sa <= 1e-6 {
                continue;
            }
            let (za, zb) = (alt_at(sa), alt_at(sb));
            let to = point_at(sb).at_alt(zb);
            let slope = (zb - za) / (sb - sa);
            let (kind, prof) = if slope > 1e-9 {
                (SegmentKind::Climb, &profiles.climb)
            } else if slope < -1e-9 {
                (SegmentKind::Descent, &profiles.descent)
            } else {
                (SegmentKind::Cruise, cruise_p)
            };
            self.push(to, kind, phase, prof, task, false);
        }
        let mine = &mut self.segs[first..];
        if takeoff {
            for s in mine.iter_mut().take_while(|s| s.kind == SegmentKind::Climb) {
                s.terminal = true;
            }
        }
        if land_at.is_some() {
            for s in mine.iter_mut().rev().take_while(|s| s.kind == SegmentKind::Descent) {
                s.terminal = true;
            }
        }
    }
}

fn fly_uav(
    ctx: &PlanContext,
    g: &PlanGenome,
    u: usize,
    seq: &[usize],
    lb: &[f64],
) -> Result<(UavPlan, Vec<(usize, Visit)>), PlanError> {
    let uav = &ctx.mission.uavs[u];
    let start = ctx.starts[u];
    let mut plan =
        UavPlan { uav: u, gcs: g.gcs[u], tasks: seq.to_vec(), legs: Vec::new(), segments: Vec::new(), start };
    if seq.is_empty() && !start.airborne {
        return Ok((plan, Vec::new()));
    }
    let mut tr = Track { ctx, vt: &ctx.vtypes[u], t: start.time, pos: start.position, segs: Vec::new() };
    let mut visits = Vec::new();
    let mut on_ground = !start.airborne;
    for &t in seq {
        let o = &ctx.mission.objectives[ctx.tasks.objective_of[t]];
        let entry = o.geometry.entry_point();
        let mut via = Vec::new();
        if on_ground {
            via.extend(uav.departure_runway_end);
        }
        via.push(entry);
        let path = tr.path_via(&via)?;
        let (dep, seg0) = (tr.t, tr.segs.len());
        tr.fly(&path, g.profile[t], Phase::Transit, None, on_ground, None);
        on_ground = false;
        let arrival = tr.t;
        let window_start = o.time_window.map_or(f64::NEG_INFINITY, |w| w.start);
        let begin = arrival.max(lb[t]).max(window_start);
        tr.hold(begin - arrival, Phase::Wait, Some(t));
        let dur = ctx.task_duration(t);
        match &o.geometry {
            ObjectiveGeometry::Zone { zone, .. } => {
                let c = zone.centroid();
                let inbound = tr.path_via(&[c])?;
                tr.fly(&inbound, g.profile[t], Phase::Task, Some(t), false, None);
                tr.hold(dur, Phase::Task, Some(t));
                let outbound = tr.path_via(&[o.geometry.exit_point()])?;
                tr.fly(&outbound, g.profile[t], Phase::Task, Some(t), false, None);
            }
            ObjectiveGeometry::Path { points } => {
                let p = tr.path_via(points)?;
                tr.fly(&p, g.profile[t], Phase::Task, Some(t), false, None);
            }
            ObjectiveGeometry::Point { .. } => tr.hold(dur, Phase::Task, Some(t)),
        }
        visits.push((t, Visit { arrival, start: begin, end: tr.t }));
        plan.legs.push(leg_record(Some(t), g.profile[t], dep, arrival, begin - arrival, &tr.segs[seg0..], path));
    }
    let mut via: Vec<GeoPoint> = uav.landing_track_start.into_iter().collect();
    via.push(uav.home());
    let path = tr.path_via(&via)?;
    let (dep, seg0) = (tr.t, tr.segs.len());
    tr.fly(&path, g.return_profile[u], Phase::Return, None, on_ground, Some(ctx.home_alt[u]));
    plan.legs.push(leg_record(None, g.return_profile[u], dep, tr.t, 0.0, &tr.segs[seg0..], path));
    plan.segments = tr.segs;
    Ok((plan, visits))
}

fn leg_record(
    task: Option<usize>,
    profile: ProfileKind,
    departure: f64,
    arrival: f64,
    wait_s: f64,
    segs: &[Segment],
    waypoints: Vec<GeoPoint>,
) -> LegRecord {
    LegRecord {
        task,
        profile,
        departure,
        arrival,
        wait_s,
        distance_m: segs.iter().filter(|s| s.phase != Phase::Task).map(|s| s.length_m).sum(),
        fuel_kg: segs.iter().filter(|s| s.phase != Phase::Task).map(Segment::fuel_kg).sum(),
        waypoints,
    }
}
