use serde::{Deserialize, Serialize};

use super::{GeoError, GeoPoint, EARTH_RADIUS_M};

/// Planar point in metres, east (`x`) and north (`y`) of a frame origin.
pub(crate) type P2 = (f64, f64);

/// Equirectangular projection around a reference latitude/longitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    lat0: f64,
    lon0: f64,
    kx: f64,
    ky: f64,
}

impl LocalFrame {
    pub fn new(origin: &GeoPoint) -> Self {
        let ky = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        Self { lat0: origin.lat, lon0: origin.lon, kx: ky * origin.lat.to_radians().cos(), ky }
    }

    pub fn project(&self, p: &GeoPoint) -> (f64, f64) {
        ((p.lon - self.lon0) * self.kx, (p.lat - self.lat0) * self.ky)
    }

    pub fn unproject(&self, xy: (f64, f64)) -> GeoPoint {
        GeoPoint::new(self.lat0 + xy.1 / self.ky, self.lon0 + xy.0 / self.kx)
    }
}

/// A simple polygon given by its vertices in order; the closing edge is
/// implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonZone {
    vertices: Vec<GeoPoint>,
}

impl PolygonZone {
    pub fn new(vertices: Vec<GeoPoint>) -> Result<Self, GeoError> {
        if vertices.len() < 3 {
            return Err(GeoError::InvalidPolygon(format!("needs at least 3 vertices, got {}", vertices.len())));
        }
        for v in &vertices {
            v.validate()?;
        }
        let pts: Vec<P2> = vertices.iter().map(|v| (v.lon, v.lat)).collect();
        if signed_area(&pts).abs() < 1e-14 {
            return Err(GeoError::InvalidPolygon("zero area".into()));
        }
        let n = pts.len();
        for i in 0..n {
            if pts[i] == pts[(i + 1) % n] {
                return Err(GeoError::InvalidPolygon(format!("repeated vertex {i}")));
            }
            for j in (i + 1)..n {
                // adjacent edges share a vertex and are allowed to touch there
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                    return Err(GeoError::InvalidPolygon(format!("edges {i} and {j} intersect")));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    /// Area-weighted centroid in the lat/lon plane.
    pub fn centroid(&self) -> GeoPoint {
        let pts: Vec<P2> = self.vertices.iter().map(|v| (v.lon, v.lat)).collect();
        let a = signed_area(&pts);
        let n = pts.len();
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            let cross = x0 * y1 - x1 * y0;
            cx += (x0 + x1) * cross;
            cy += (y0 + y1) * cross;
        }
        GeoPoint::new(cy / (6.0 * a), cx / (6.0 * a))
    }

    pub(crate) fn project(&self, frame: &LocalFrame) -> Vec<P2> {
        self.vertices.iter().map(|v| frame.project(v)).collect()
    }
}

/// Even-odd containment in the lat/lon plane. Points on an edge or vertex
/// count as inside.
pub fn point_in_polygon(zone: &PolygonZone, p: &GeoPoint) -> bool {
    let pts: Vec<P2> = zone.vertices.iter().map(|v| (v.lon, v.lat)).collect();
    contains_planar(&pts, (p.lon, p.lat))
}

pub(crate) fn contains_planar(poly: &[P2], p: P2) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if point_segment_distance(p, a, b) <= 1e-12 * (1.0 + a.0.abs().max(a.1.abs())) {
            return true;
        }
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) / (b.1 - a.1) * (b.0 - a.0);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub(crate) fn signed_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (x0, y0) = poly[i];
            let (x1, y1) = poly[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum::<f64>()
        / 2.0
}

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn on_segment(a: P2, b: P2, p: P2) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

/// Closed-segment intersection test (touching counts).
pub(crate) fn segments_intersect(a: P2, b: P2, c: P2, d: P2) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

pub(crate) fn point_segment_distance(p: P2, a: P2, b: P2) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    (p.0 - qx).hypot(p.1 - qy)
}

pub(crate) fn segment_segment_distance(a: P2, b: P2, c: P2, d: P2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Distance from a segment to a filled polygon (0 when they meet).
pub(crate) fn segment_polygon_distance(a: P2, b: P2, poly: &[P2]) -> f64 {
    if contains_planar(poly, a) || contains_planar(poly, b) {
        return 0.0;
    }
    let n = poly.len();
    (0..n).map(|i| segment_segment_distance(a, b, poly[i], poly[(i + 1) % n])).fold(f64::INFINITY, f64::min)
}

pub(crate) fn point_polygon_distance(p: P2, poly: &[P2]) -> f64 {
    segment_polygon_distance(p, p, poly)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> PolygonZone {
        PolygonZone::new(vec![
            GeoPoint::new(36.80, -2.30),
            GeoPoint::new(36.80, -2.28),
            GeoPoint::new(36.82, -2.27),
            GeoPoint::new(36.82, -2.31),
        ])
        .unwrap()
    }

    #[test]
    fn centroid_is_inside() {
        let z = quad();
        assert!(point_in_polygon(&z, &z.centroid()));
    }

    #[test]
    fn far_point_is_outside() {
        assert!(!point_in_polygon(&quad(), &GeoPoint::new(37.5, -1.0)));
    }

    #[test]
    fn vertices_and_edges_are_inside() {
        let z = quad();
        for v in z.vertices() {
            assert!(point_in_polygon(&z, v));
        }
        assert!(point_in_polygon(&z, &GeoPoint::new(36.80, -2.29)));
    }

    #[test]
    fn concave_polygon_notch_is_outside() {
        // U shape opening north
        let z = PolygonZone::new(vec![
            GeoPoint::new(0.0, 0.0),
            GeoPoint::new(0.0, 3.0),
            GeoPoint::new(3.0, 3.0),
            GeoPoint::new(3.0, 2.0),
            GeoPoint::new(1.0, 2.0),
            GeoPoint::new(1.0, 1.0),
            GeoPoint::new(3.0, 1.0),
            GeoPoint::new(3.0, 0.0),
        ])
        .unwrap();
        assert!(!point_in_polygon(&z, &GeoPoint::new(2.0, 1.5)));
        assert!(point_in_polygon(&z, &GeoPoint::new(0.5, 1.5)));
        assert!(point_in_polygon(&z, &GeoPoint::new(2.0, 0.5)));
    }

    #[test]
    fn rejects_degenerate_polygons() {
        assert!(PolygonZone::new(vec![GeoPoint::new(0.0, 0.0), GeoPoint::new(1.0, 1.0)]).is_err());
        // collinear
        assert!(
            PolygonZone::new(vec![GeoPoint::new(0.0, 0.0), GeoPoint::new(1.0, 1.0), GeoPoint::new(2.0, 2.0)]).is_err()
        );
        // bow tie
        assert!(PolygonZone::new(vec![
            GeoPoint::new(0.0, 0.0),
            GeoPoint::new(1.0, 1.0),
            GeoPoint::new(0.0, 1.0),
            GeoPoint::new(1.0, 0.0)
        ])
        .is_err());
    }

    #[test]
    fn frame_roundtrip() {
        let f = LocalFrame::new(&GeoPoint::new(36.8, -2.3));
        let p = GeoPoint::new(36.83, -2.21);
        let q = f.unproject(f.project(&p));
        assert!((q.lat - p.lat).abs() < 1e-12 && (q.lon - p.lon).abs() < 1e-12);
    }
}
