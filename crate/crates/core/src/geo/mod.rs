//! Geodesy, terrain, polygons and obstacle-avoiding routes.
//!
//! Everything in here works on a spherical earth of mean radius
//! [`EARTH_RADIUS_M`]. Horizontal geometry (polygon tests, routing) happens in a
//! local equirectangular frame, which is accurate to well under a metre over
//! the few tens of kilometres a mission covers.

mod grid;
mod polygon;
mod profile;
mod route;
pub mod terrain;

pub use grid::{ArcSeconds, ElevationGrid, GridBounds};
pub use polygon::{point_in_polygon, LocalFrame, PolygonZone};
pub use profile::{ground_clearance_profile, ClearanceSample};
pub use route::{route_around_nfzs, LegMeta, Route, Router, DEFAULT_NFZ_MARGIN_M};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean earth radius used by every distance computation.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

pub const FEET_TO_M: f64 = 0.3048;
pub const NM_TO_M: f64 = 1852.0;
pub const KNOT_TO_MPS: f64 = 1852.0 / 3600.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("point ({lat}, {lon}) outside elevation grid bounds")]
    OutOfBounds { lat: f64, lon: f64 },
    #[error("invalid elevation grid: {0}")]
    InvalidGrid(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid route: {0}")]
    InvalidRoute(String),
    #[error("no NFZ-free path: {0}")]
    NoPath(String),
    #[error("point has no altitude")]
    MissingAltitude,
    #[error("step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("malformed elevation file at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A geographic position. `alt` is metres above mean sea level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt: Option<f64>,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon, alt: None }
    }

    pub fn with_alt(lat: f64, lon: f64, alt: f64) -> Self {
        Self { lat, lon, alt: Some(alt) }
    }

    pub fn at_alt(self, alt: f64) -> Self {
        Self { alt: Some(alt), ..self }
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
            && self.alt.is_none_or(f64::is_finite);
        if ok {
            Ok(())
        } else {
            Err(GeoError::InvalidCoordinate { lat: self.lat, lon: self.lon })
        }
    }

    /// Same horizontal position, ignoring altitude.
    pub fn same_place(&self, other: &GeoPoint) -> bool {
        self.lat == other.lat && self.lon == other.lon
    }

    /// Straight interpolation in the lat/lon plane (and altitude when both
    /// ends carry one).
    pub fn lerp(&self, other: &GeoPoint, t: f64) -> GeoPoint {
        let alt = match (self.alt, other.alt) {
            (Some(a), Some(b)) => Some(a + (b - a) * t),
            _ => None,
        };
        GeoPoint { lat: self.lat + (other.lat - self.lat) * t, lon: self.lon + (other.lon - self.lon) * t, alt }
    }
}

/// Great-circle distance in metres (haversine).
pub fn geodesic_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (la1, lo1) = (a.lat.to_radians(), a.lon.to_radians());
    let (la2, lo2) = (b.lat.to_radians(), b.lon.to_radians());
    let dlat = la2 - la1;
    let dlon = lo2 - lo1;
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Horizontal distance combined with altitude difference. Points without an
/// altitude are treated as being at 0 m.
pub fn slant_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let h = geodesic_distance(a, b);
    let dz = a.alt.unwrap_or(0.0) - b.alt.unwrap_or(0.0);
    h.hypot(dz)
}

/// Horizontal length of a polyline.
pub fn polyline_length(points: &[GeoPoint]) -> f64 {
    points.windows(2).map(|w| geodesic_distance(&w[0], &w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn coincident_points_are_zero_apart() {
        let p = GeoPoint::new(36.8, -2.3);
        assert_eq!(geodesic_distance(&p, &p), 0.0);
    }

    #[test]
    fn matches_independent_haversine_value() {
        // computed with a separate haversine implementation, R = 6 371 000 m
        let expected = 19_766.268_627_405_625;
        let d = geodesic_distance(&GeoPoint::new(36.80, -2.396), &GeoPoint::new(36.80, -2.174));
        assert!(((d - expected) / expected).abs() < 1e-6, "{d}");
    }

    #[test]
    fn invalid_coordinates_rejected() {
        assert!(GeoPoint::new(91.0, 0.0).validate().is_err());
        assert!(GeoPoint::new(0.0, -181.0).validate().is_err());
        assert!(GeoPoint::with_alt(0.0, 0.0, f64::NAN).validate().is_err());
        assert!(GeoPoint::with_alt(-90.0, 180.0, 10.0).validate().is_ok());
    }

    fn coord() -> impl Strategy<Value = GeoPoint> {
        (36.0f64..37.5, -3.0f64..-1.5).prop_map(|(lat, lon)| GeoPoint::new(lat, lon))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn distance_is_symmetric(a in coord(), b in coord()) {
            prop_assert_eq!(geodesic_distance(&a, &b), geodesic_distance(&b, &a));
            prop_assert!(geodesic_distance(&a, &b) >= 0.0);
        }

        #[test]
        fn triangle_inequality(a in coord(), b in coord(), c in coord()) {
            let ab = geodesic_distance(&a, &b);
            let bc = geodesic_distance(&b, &c);
            let ac = geodesic_distance(&a, &c);
            prop_assert!(ac <= (ab + bc) * (1.0 + 1e-9) + 1e-9);
        }
    }
}
