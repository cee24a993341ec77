//! Writes the synthetic elevation grids used by the fixtures.
//!
//! cargo run -p skyplan-core --example gen_terrain -- fixtures/

use std::path::PathBuf;

use skyplan_core::geo::terrain::Terrain;
use skyplan_core::geo::{ArcSeconds, GridBounds};

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let bounds = GridBounds::new(36.76, -2.396, 36.85, -2.174);
    // coastal plain rising inland, with a ridge in the west
    let terrain = Terrain::Sum(vec![
        Terrain::Ramp { south: 20.0, north: 250.0 },
        Terrain::Ridge { lon: -2.36, height: 250.0, half_width_m: 800.0 },
    ]);
    let grid = terrain.generate(bounds, ArcSeconds::S7_5).expect("valid grid");
    let path = dir.join("usecase1.egrid");
    std::fs::write(&path, grid.to_egrid()).expect("write grid");
    println!("{} ({}x{})", path.display(), grid.rows(), grid.cols());
}
