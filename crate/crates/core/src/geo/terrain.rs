//! Synthetic terrains for fixtures and tests.

use super::{ArcSeconds, ElevationGrid, GeoError, GeoPoint, GridBounds, LocalFrame};

#[derive(Debug, Clone, PartialEq)]
pub enum Terrain {
    Flat(f64),
    /// Linear rise from `south` metres on the southern edge to `north` on the
    /// northern edge.
    Ramp {
        south: f64,
        north: f64,
    },
    /// North-south ridge along longitude `lon` with a triangular cross-section.
    Ridge {
        lon: f64,
        height: f64,
        half_width_m: f64,
    },
    Sum(Vec<Terrain>),
}

impl Terrain {
    pub fn height(&self, bounds: &GridBounds, p: &GeoPoint) -> f64 {
        match self {
            Terrain::Flat(h) => *h,
            Terrain::Ramp { south, north } => {
                let t = (p.lat - bounds.lat0) / (bounds.lat1 - bounds.lat0);
                south + (north - south) * t
            }
            Terrain::Ridge { lon, height, half_width_m } => {
                let frame = LocalFrame::new(&GeoPoint::new(p.lat, *lon));
                let dx = frame.project(p).0.abs();
                (height * (1.0 - dx / half_width_m)).max(0.0)
            }
            Terrain::Sum(parts) => parts.iter().map(|t| t.height(bounds, p)).sum(),
        }
    }

    pub fn generate(&self, bounds: GridBounds, arc: ArcSeconds) -> Result<ElevationGrid, GeoError> {
        ElevationGrid::from_fn(bounds, arc, |p| self.height(&bounds, p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_and_ridge_shapes() {
        let b = GridBounds::new(36.76, -2.396, 36.85, -2.174);
        let ramp = Terrain::Ramp { south: 0.0, north: 300.0 }.generate(b, ArcSeconds::S15).unwrap();
        assert!(ramp.elevation_at(&GeoPoint::new(36.76, -2.3)).unwrap().abs() < 1e-9);
        assert!((ramp.elevation_at(&GeoPoint::new(36.85, -2.3)).unwrap() - 300.0).abs() < 1e-9);

        let ridge = Terrain::Ridge { lon: -2.3, height: 400.0, half_width_m: 1000.0 };
        assert!((ridge.height(&b, &GeoPoint::new(36.8, -2.3)) - 400.0).abs() < 1e-9);
        assert_eq!(ridge.height(&b, &GeoPoint::new(36.8, -2.2)), 0.0);
    }
}
