use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::polygon::{point_polygon_distance, segment_polygon_distance, LocalFrame, P2};
use super::{polyline_length, GeoError, GeoPoint, GridBounds, PolygonZone};

/// Safety buffer kept around every no-fly zone unless told otherwise.
pub const DEFAULT_NFZ_MARGIN_M: f64 = 100.0;

/// Candidate nodes placed on a ring around each polygon vertex.
const RING_DIRECTIONS: usize = 16;
/// Ring radius relative to the margin; chords between neighbouring ring nodes
/// must stay outside the inflated zone.
const RING_SLACK: f64 = 1.05;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LegMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_mps: Option<f64>,
}

/// Polyline with at least two waypoints and no repeated consecutive
/// positions. `meta[i]` describes the leg from waypoint `i` to `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    waypoints: Vec<GeoPoint>,
    meta: Vec<LegMeta>,
}

impl Route {
    pub fn new(waypoints: Vec<GeoPoint>) -> Result<Self, GeoError> {
        if waypoints.len() < 2 {
            return Err(GeoError::InvalidRoute(format!("needs at least 2 waypoints, got {}", waypoints.len())));
        }
        if let Some(i) = waypoints.windows(2).position(|w| w[0].same_place(&w[1])) {
            return Err(GeoError::InvalidRoute(format!("waypoints {i} and {} coincide", i + 1)));
        }
        let meta = vec![LegMeta::default(); waypoints.len() - 1];
        Ok(Self { waypoints, meta })
    }

    pub fn waypoints(&self) -> &[GeoPoint] {
        &self.waypoints
    }

    pub fn meta(&self) -> &[LegMeta] {
        &self.meta
    }

    pub fn set_meta(&mut self, meta: LegMeta) {
        self.meta.iter_mut().for_each(|m| *m = meta.clone());
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.waypoints)
    }

    pub fn start(&self) -> &GeoPoint {
        &self.waypoints[0]
    }

    pub fn goal(&self) -> &GeoPoint {
        self.waypoints.last().expect("route has waypoints")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed for a min-heap
        other.0.total_cmp(&self.0)
    }
}

type CacheKey = [u64; 4];
type RouteResult = Result<Arc<[GeoPoint]>, GeoError>;

/// Visibility-graph router over a fixed set of inflated no-fly zones.
///
/// Node-to-node visibility is computed once; start and goal are attached per
/// query. Results are memoised, so the router can be shared between threads
/// evaluating many plans over the same mission.
#[derive(Debug)]
pub struct Router {
    frame: LocalFrame,
    margin: f64,
    area: Option<(P2, P2)>,
    obstacles: Vec<Obstacle>,
    nodes: Vec<P2>,
    adjacency: Vec<Vec<(usize, f64)>>,
    cache: RwLock<HashMap<CacheKey, RouteResult>>,
}

#[derive(Debug)]
struct Obstacle {
    poly: Vec<P2>,
    min: P2,
    max: P2,
}

impl Router {
    /// `area`, when given, keeps detour nodes inside the mission bounds.
    pub fn new(nfzs: &[PolygonZone], margin: f64, area: Option<&GridBounds>) -> Self {
        let origin = match (area, nfzs.first()) {
            (Some(b), _) => b.center(),
            (None, Some(z)) => z.centroid(),
            (None, None) => GeoPoint::new(0.0, 0.0),
        };
        let frame = LocalFrame::new(&origin);
        let obstacles: Vec<Obstacle> = nfzs
            .iter()
            .map(|z| {
                let poly = z.project(&frame);
                let min = poly.iter().fold((f64::INFINITY, f64::INFINITY), |m, p| (m.0.min(p.0), m.1.min(p.1)));
                let max = poly.iter().fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |m, p| (m.0.max(p.0), m.1.max(p.1)));
                Obstacle { poly, min, max }
            })
            .collect();
        let area = area.map(|b| {
            let sw = frame.project(&GeoPoint::new(b.lat0, b.lon0));
            let ne = frame.project(&GeoPoint::new(b.lat1, b.lon1));
            (sw, ne)
        });
        let mut router = Self {
            frame,
            margin,
            area,
            obstacles,
            nodes: Vec::new(),
            adjacency: Vec::new(),
            cache: RwLock::new(HashMap::new()),
        };
        router.build_graph();
        router
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    fn build_graph(&mut self) {
        let radius = self.margin * RING_SLACK / (std::f64::consts::PI / RING_DIRECTIONS as f64).cos();
        let mut nodes = Vec::new();
        for ob in &self.obstacles {
            for &(vx, vy) in &ob.poly {
                for k in 0..RING_DIRECTIONS {
                    let a = k as f64 * std::f64::consts::TAU / RING_DIRECTIONS as f64;
                    let p = (vx + radius * a.cos(), vy + radius * a.sin());
                    if self.point_clear(p) && self.in_area(p) {
                        nodes.push(p);
                    }
                }
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if self.segment_clear(nodes[i], nodes[j]) {
                    let d = dist(nodes[i], nodes[j]);
                    adjacency[i].push((j, d));
                    adjacency[j].push((i, d));
                }
            }
        }
        self.nodes = nodes;
        self.adjacency = adjacency;
    }

    fn in_area(&self, p: P2) -> bool {
        match self.area {
            Some((sw, ne)) => p.0 >= sw.0 && p.0 <= ne.0 && p.1 >= sw.1 && p.1 <= ne.1,
            None => true,
        }
    }

    fn point_clear(&self, p: P2) -> bool {
        self.obstacles.iter().all(|ob| point_polygon_distance(p, &ob.poly) > self.margin)
    }

    fn segment_clear(&self, a: P2, b: P2) -> bool {
        let m = self.margin;
        self.obstacles.iter().all(|ob| {
            let disjoint_box = a.0.max(b.0) < ob.min.0 - m
                || a.0.min(b.0) > ob.max.0 + m
                || a.1.max(b.1) < ob.min.1 - m
                || a.1.min(b.1) > ob.max.1 + m;
            disjoint_box || segment_polygon_distance(a, b, &ob.poly) > m
        })
    }

    /// True when the straight segment keeps clear of every inflated zone.
    pub fn is_clear(&self, a: &GeoPoint, b: &GeoPoint) -> bool {
        self.segment_clear(self.frame.project(a), self.frame.project(b))
    }

    /// True when `p` lies inside some zone inflated by the margin.
    pub fn is_blocked(&self, p: &GeoPoint) -> bool {
        !self.point_clear(self.frame.project(p))
    }

    /// Shortest visibility-graph polyline from `start` to `goal`.
    pub fn route(&self, start: &GeoPoint, goal: &GeoPoint) -> Result<Route, GeoError> {
        let pts = self.route_points(start, goal)?;
        Route::new(pts.to_vec())
    }

    /// Like [`Router::route`] but returns the shared, cached waypoint list.
    /// `start` and `goal` keep their altitudes; detour points carry none.
    pub fn route_points(&self, start: &GeoPoint, goal: &GeoPoint) -> Result<Arc<[GeoPoint]>, GeoError> {
        let key = [start.lat.to_bits(), start.lon.to_bits(), goal.lat.to_bits(), goal.lon.to_bits()];
        if let Some(hit) = self.cache.read().expect("route cache poisoned").get(&key) {
            return hit.clone().map(|pts| restore_alts(pts, start, goal));
        }
        let computed = self.compute(start, goal).map(Arc::<[GeoPoint]>::from);
        self.cache.write().expect("route cache poisoned").insert(key, computed.clone());
        computed.map(|pts| restore_alts(pts, start, goal))
    }

    fn compute(&self, start: &GeoPoint, goal: &GeoPoint) -> Result<Vec<GeoPoint>, GeoError> {
        start.validate()?;
        goal.validate()?;
        if start.same_place(goal) {
            return Err(GeoError::InvalidRoute("start and goal coincide".into()));
        }
        let s = self.frame.project(start);
        let g = self.frame.project(goal);
        if !self.point_clear(s) {
            return Err(GeoError::NoPath(format!(
                "start ({}, {}) lies inside an inflated no-fly zone",
                start.lat, start.lon
            )));
        }
        if !self.point_clear(g) {
            return Err(GeoError::NoPath(format!(
                "goal ({}, {}) lies inside an inflated no-fly zone",
                goal.lat, goal.lon
            )));
        }
        if self.segment_clear(s, g) {
            return Ok(vec![*start, *goal]);
        }

        let n = self.nodes.len();
        let (src, dst) = (n, n + 1);
        let pos = |i: usize| -> P2 {
            if i == src {
                s
            } else if i == dst {
                g
            } else {
                self.nodes[i]
            }
        };
        let from_start: Vec<(usize, f64)> =
            (0..n).filter(|&i| self.segment_clear(s, self.nodes[i])).map(|i| (i, dist(s, self.nodes[i]))).collect();
        let to_goal: Vec<bool> = (0..n).map(|i| self.segment_clear(self.nodes[i], g)).collect();

        let mut best = vec![f64::INFINITY; n + 2];
        let mut prev = vec![usize::MAX; n + 2];
        let mut heap = BinaryHeap::new();
        best[src] = 0.0;
        heap.push((Cost(0.0), src));
        while let Some((Cost(d), u)) = heap.pop() {
            if d > best[u] {
                continue;
            }
            if u == dst {
                break;
            }
            let mut relax = |v: usize, w: f64, heap: &mut BinaryHeap<(Cost, usize)>| {
                let nd = d + w;
                if nd < best[v] {
                    best[v] = nd;
                    prev[v] = u;
                    heap.push((Cost(nd), v));
                }
            };
            if u == src {
                for &(v, w) in &from_start {
                    relax(v, w, &mut heap);
                }
            } else {
                for &(v, w) in &self.adjacency[u] {
                    relax(v, w, &mut heap);
                }
                if to_goal[u] {
                    relax(dst, dist(pos(u), g), &mut heap);
                }
            }
        }
        if !best[dst].is_finite() {
            return Err(GeoError::NoPath(format!(
                "no detour from ({}, {}) to ({}, {})",
                start.lat, start.lon, goal.lat, goal.lon
            )));
        }
        let mut chain = vec![dst];
        while let Some(&last) = chain.last() {
            if last == src {
                break;
            }
            chain.push(prev[last]);
        }
        chain.reverse();
        Ok(chain
            .into_iter()
            .map(|i| {
                if i == src {
                    *start
                } else if i == dst {
                    *goal
                } else {
                    self.frame.unproject(pos(i))
                }
            })
            .collect())
    }
}

fn restore_alts(pts: Arc<[GeoPoint]>, start: &GeoPoint, goal: &GeoPoint) -> Arc<[GeoPoint]> {
    let first = pts.first().map(|p| p.alt);
    let last = pts.last().map(|p| p.alt);
    if first == Some(start.alt) && last == Some(goal.alt) {
        return pts;
    }
    let mut v = pts.to_vec();
    let k = v.len() - 1;
    v[0].alt = start.alt;
    v[k].alt = goal.alt;
    v.into()
}

fn dist(a: P2, b: P2) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// One-shot NFZ-avoiding route. Builds a throwaway [`Router`]; prefer a shared
/// router when routing many legs over the same zones.
pub fn route_around_nfzs(
    start: &GeoPoint,
    goal: &GeoPoint,
    nfzs: &[PolygonZone],
    margin: f64,
) -> Result<Route, GeoError> {
    Router::new(nfzs, margin, None).route(start, goal)
}
