use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{geodesic_distance, GeoError, GeoPoint};

/// Tolerance, in degrees, for points sitting on the grid boundary.
const BOUNDS_EPS_DEG: f64 = 1e-9;

/// Elevation map resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcSeconds {
    S30,
    S15,
    S7_5,
}

impl ArcSeconds {
    pub fn seconds(self) -> f64 {
        match self {
            ArcSeconds::S30 => 30.0,
            ArcSeconds::S15 => 15.0,
            ArcSeconds::S7_5 => 7.5,
        }
    }

    pub fn degrees(self) -> f64 {
        self.seconds() / 3600.0
    }

    pub fn from_seconds(value: f64) -> Option<Self> {
        if value == 30.0 {
            Some(ArcSeconds::S30)
        } else if value == 15.0 {
            Some(ArcSeconds::S15)
        } else if value == 7.5 {
            Some(ArcSeconds::S7_5)
        } else {
            None
        }
    }
}

impl fmt::Display for ArcSeconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.seconds())
    }
}

impl Serialize for ArcSeconds {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.seconds())
    }
}

impl<'de> Deserialize<'de> for ArcSeconds {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        ArcSeconds::from_seconds(v)
            .ok_or_else(|| serde::de::Error::custom(format!("arc seconds must be 30, 15 or 7.5, got {v}")))
    }
}

/// South-west (`lat0`, `lon0`) and north-east (`lat1`, `lon1`) corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub lat0: f64,
    pub lon0: f64,
    pub lat1: f64,
    pub lon1: f64,
}

impl GridBounds {
    pub fn new(lat0: f64, lon0: f64, lat1: f64, lon1: f64) -> Self {
        Self { lat0, lon0, lat1, lon1 }
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        GeoPoint::new(self.lat0, self.lon0).validate()?;
        GeoPoint::new(self.lat1, self.lon1).validate()?;
        if self.lat0 < self.lat1 && self.lon0 < self.lon1 {
            Ok(())
        } else {
            Err(GeoError::InvalidGrid("bounds must have lat0 < lat1 and lon0 < lon1".into()))
        }
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        p.lat >= self.lat0 - BOUNDS_EPS_DEG
            && p.lat <= self.lat1 + BOUNDS_EPS_DEG
            && p.lon >= self.lon0 - BOUNDS_EPS_DEG
            && p.lon <= self.lon1 + BOUNDS_EPS_DEG
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint::new((self.lat0 + self.lat1) / 2.0, (self.lon0 + self.lon1) / 2.0)
    }

    /// Node counts (rows, cols) for a grid covering these bounds.
    pub fn grid_shape(&self, arc: ArcSeconds) -> (usize, usize) {
        let rows = ((self.lat1 - self.lat0) / arc.degrees()).round() as usize + 1;
        let cols = ((self.lon1 - self.lon0) / arc.degrees()).round() as usize + 1;
        (rows.max(2), cols.max(2))
    }
}

/// Terrain heights in metres on a regular lat/lon lattice. Row 0 is the
/// northern edge, column 0 the western edge; nodes sit on the bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    bounds: GridBounds,
    arc: ArcSeconds,
    rows: usize,
    cols: usize,
    heights: Vec<f64>,
}

impl ElevationGrid {
    pub fn new(
        bounds: GridBounds,
        arc: ArcSeconds,
        rows: usize,
        cols: usize,
        heights: Vec<f64>,
    ) -> Result<Self, GeoError> {
        bounds.validate()?;
        if rows < 2 || cols < 2 {
            return Err(GeoError::InvalidGrid(format!("grid needs at least 2x2 nodes, got {rows}x{cols}")));
        }
        if rows * cols != heights.len() {
            return Err(GeoError::InvalidGrid(format!(
                "{rows}x{cols} grid needs {} heights, got {}",
                rows * cols,
                heights.len()
            )));
        }
        if let Some(h) = heights.iter().find(|h| !h.is_finite()) {
            return Err(GeoError::InvalidGrid(format!("non-finite height {h}")));
        }
        let step = arc.degrees();
        let expect_rows = (bounds.lat1 - bounds.lat0) / step + 1.0;
        let expect_cols = (bounds.lon1 - bounds.lon0) / step + 1.0;
        if (rows as f64 - expect_rows).abs() > 1.0 + 1e-6 || (cols as f64 - expect_cols).abs() > 1.0 + 1e-6 {
            return Err(GeoError::InvalidGrid(format!(
                "{rows}x{cols} nodes inconsistent with bounds at {arc} arc-seconds \
                 (expected about {expect_rows:.1}x{expect_cols:.1})"
            )));
        }
        Ok(Self { bounds, arc, rows, cols, heights })
    }

    /// Grid with the shape implied by `bounds` and `arc`, filled by `height`.
    pub fn from_fn(
        bounds: GridBounds,
        arc: ArcSeconds,
        mut height: impl FnMut(&GeoPoint) -> f64,
    ) -> Result<Self, GeoError> {
        bounds.validate()?;
        let (rows, cols) = bounds.grid_shape(arc);
        let dlat = (bounds.lat1 - bounds.lat0) / (rows - 1) as f64;
        let dlon = (bounds.lon1 - bounds.lon0) / (cols - 1) as f64;
        let mut heights = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let p = GeoPoint::new(bounds.lat1 - r as f64 * dlat, bounds.lon0 + c as f64 * dlon);
                heights.push(height(&p));
            }
        }
        Self::new(bounds, arc, rows, cols, heights)
    }

    pub fn flat(bounds: GridBounds, arc: ArcSeconds, height: f64) -> Result<Self, GeoError> {
        Self::from_fn(bounds, arc, |_| height)
    }

    pub fn bounds(&self) -> &GridBounds {
        &self.bounds
    }

    pub fn arc_seconds(&self) -> ArcSeconds {
        self.arc
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn node(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.cols + col]
    }

    pub fn node_position(&self, row: usize, col: usize) -> GeoPoint {
        GeoPoint::new(self.bounds.lat1 - row as f64 * self.lat_step(), self.bounds.lon0 + col as f64 * self.lon_step())
    }

    fn lat_step(&self) -> f64 {
        (self.bounds.lat1 - self.bounds.lat0) / (self.rows - 1) as f64
    }

    fn lon_step(&self) -> f64 {
        (self.bounds.lon1 - self.bounds.lon0) / (self.cols - 1) as f64
    }

    /// Bilinear interpolation of the four nodes around `p`.
    pub fn elevation_at(&self, p: &GeoPoint) -> Result<f64, GeoError> {
        if !self.bounds.contains(p) {
            return Err(GeoError::OutOfBounds { lat: p.lat, lon: p.lon });
        }
        let r = ((self.bounds.lat1 - p.lat) / self.lat_step()).clamp(0.0, (self.rows - 1) as f64);
        let c = ((p.lon - self.bounds.lon0) / self.lon_step()).clamp(0.0, (self.cols - 1) as f64);
        let i = (r.floor() as usize).min(self.rows - 2);
        let j = (c.floor() as usize).min(self.cols - 2);
        let fr = r - i as f64;
        let fc = c - j as f64;
        let h00 = self.node(i, j);
        let h01 = self.node(i, j + 1);
        let h10 = self.node(i + 1, j);
        let h11 = self.node(i + 1, j + 1);
        let top = h00 + (h01 - h00) * fc;
        let bottom = h10 + (h11 - h10) * fc;
        Ok(top + (bottom - top) * fr)
    }

    /// True when the terrain stays strictly below the straight 3-D segment
    /// `a`–`b` at every interior sample taken every `step` metres. The
    /// endpoints themselves are the observers and are not sampled.
    pub fn line_of_sight(&self, a: &GeoPoint, b: &GeoPoint, step: f64) -> Result<bool, GeoError> {
        if !(step > 0.0) {
            return Err(GeoError::InvalidStep(step));
        }
        let (za, zb) = match (a.alt, b.alt) {
            (Some(za), Some(zb)) => (za, zb),
            _ => return Err(GeoError::MissingAltitude),
        };
        // sample from a canonical endpoint so the result is symmetric bit for bit
        let (p, q) = if (a.lat, a.lon, za) <= (b.lat, b.lon, zb) { (a, b) } else { (b, a) };
        let len = geodesic_distance(p, q);
        let n = (len / step).ceil().max(1.0) as usize;
        for k in 1..n {
            let s = p.lerp(q, k as f64 / n as f64);
            let terrain = self.elevation_at(&s)?;
            if terrain >= s.alt.unwrap_or(f64::NEG_INFINITY) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Write the EGRID text format.
    pub fn to_egrid(&self) -> String {
        let b = &self.bounds;
        let mut out =
            format!("EGRID 1 {} {} {} {} {} {} {}\n", b.lat0, b.lon0, b.lat1, b.lon1, self.arc, self.rows, self.cols);
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| format!("{}", self.node(r, c))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

impl FromStr for ElevationGrid {
    type Err = GeoError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(GeoError::Parse { line: 1, message: "empty file".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let perr = |line: usize, message: String| GeoError::Parse { line, message };
        if fields.len() != 9 || fields[0] != "EGRID" || fields[1] != "1" {
            return Err(perr(1, "expected `EGRID 1 lat0 lon0 lat1 lon1 arcsec rows cols`".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| perr(1, format!("{s}: {e}")));
        let bounds = GridBounds::new(num(fields[2])?, num(fields[3])?, num(fields[4])?, num(fields[5])?);
        let arc = ArcSeconds::from_seconds(num(fields[6])?)
            .ok_or_else(|| perr(1, format!("unsupported arc seconds {}", fields[6])))?;
        let rows: usize = fields[7].parse().map_err(|e| perr(1, format!("rows: {e}")))?;
        let cols: usize = fields[8].parse().map_err(|e| perr(1, format!("cols: {e}")))?;
        let mut heights = Vec::with_capacity(rows * cols);
        let mut seen_rows = 0;
        for (idx, line) in lines {
            let before = heights.len();
            for tok in line.split_whitespace() {
                heights.push(tok.parse::<f64>().map_err(|e| perr(idx + 1, format!("{tok}: {e}")))?);
            }
            if heights.len() - before != cols {
                return Err(perr(idx + 1, format!("expected {cols} values, found {}", heights.len() - before)));
            }
            seen_rows += 1;
        }
        if seen_rows != rows {
            return Err(perr(1, format!("header declares {rows} rows, file has {seen_rows}")));
        }
        ElevationGrid::new(bounds, arc, rows, cols, heights)
    }
}
