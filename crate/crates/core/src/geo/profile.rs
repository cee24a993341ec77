use serde::{Deserialize, Serialize};

use super::{geodesic_distance, ElevationGrid, GeoError, GeoPoint};

/// One point of an altitude profile. All values in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearanceSample {
    pub distance_along: f64,
    pub terrain: f64,
    pub vehicle_alt: f64,
}

impl ClearanceSample {
    pub fn clearance(&self) -> f64 {
        self.vehicle_alt - self.terrain
    }
}

/// Terrain and vehicle altitude every `step` metres along a polyline whose
/// waypoints all carry altitudes. Both ends of every leg are sampled, so a
/// single waypoint yields a single sample at distance 0.
pub fn ground_clearance_profile(
    grid: &ElevationGrid,
    waypoints: &[GeoPoint],
    step: f64,
) -> Result<Vec<ClearanceSample>, GeoError> {
    if !(step > 0.0) {
        return Err(GeoError::InvalidStep(step));
    }
    if waypoints.iter().any(|w| w.alt.is_none()) {
        return Err(GeoError::MissingAltitude);
    }
    let sample = |p: &GeoPoint, along: f64| -> Result<ClearanceSample, GeoError> {
        Ok(ClearanceSample {
            distance_along: along,
            terrain: grid.elevation_at(p)?,
            vehicle_alt: p.alt.unwrap_or_default(),
        })
    };
    let Some(first) = waypoints.first() else {
        return Ok(Vec::new());
    };
    let mut out = vec![sample(first, 0.0)?];
    let mut along = 0.0;
    for w in waypoints.windows(2) {
        let len = geodesic_distance(&w[0], &w[1]);
        let n = (len / step).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            out.push(sample(&w[0].lerp(&w[1], t), along + len * t)?);
        }
        along += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{ArcSeconds, GridBounds};

    fn grid() -> ElevationGrid {
        ElevationGrid::flat(GridBounds::new(36.76, -2.396, 36.85, -2.174), ArcSeconds::S7_5, 0.0).unwrap()
    }

    #[test]
    fn level_flight_over_flat_ground() {
        let wps = [
            GeoPoint::with_alt(36.77, -2.39, 500.0),
            GeoPoint::with_alt(36.80, -2.30, 500.0),
            GeoPoint::with_alt(36.84, -2.20, 500.0),
        ];
        let prof = ground_clearance_profile(&grid(), &wps, 100.0).unwrap();
        assert!(prof.len() > 3);
        assert!(prof.iter().all(|s| (s.clearance() - 500.0).abs() < 1e-9));
        assert!(prof.windows(2).all(|w| w[1].distance_along >= w[0].distance_along));
    }

    #[test]
    fn single_waypoint_gives_one_sample() {
        let prof = ground_clearance_profile(&grid(), &[GeoPoint::with_alt(36.8, -2.3, 300.0)], 50.0).unwrap();
        assert_eq!(prof.len(), 1);
        assert_eq!(prof[0].distance_along, 0.0);
    }

    #[test]
    fn leaving_the_grid_is_an_error() {
        let wps = [GeoPoint::with_alt(36.8, -2.3, 300.0), GeoPoint::with_alt(37.5, -2.3, 300.0)];
        assert!(matches!(ground_clearance_profile(&grid(), &wps, 100.0), Err(GeoError::OutOfBounds { .. })));
    }
}
