//! The eye-band preset keeps spots off the eyes even when the detector's
//! weakest point lies inside the band.
//!
//! cargo run --example eye_exclusion

use lpo::oracle::{make_synthetic, GaussianWell, SyntheticSpec};
use lpo::raster::ImageRaster;
use lpo::search::{eye_exclusion_preset, grid_search, SearchConfig};
use lpo::spot::{render_spot, SpotParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = [160, 200];
    let band = eye_exclusion_preset(dims);
    let b = band[0];
    let eyes = [f64::from(b.x1 + b.x2) / 2.0, f64::from(b.y1 + b.y2) / 2.0];
    let oracle = make_synthetic(SyntheticSpec::Gaussians {
        baseline: 0.99,
        wells: vec![GaussianWell { center: eyes, sigma: 25.0, depth: 0.8 }],
    })?;
    let crop = ImageRaster::filled(dims[0], dims[1], [150, 120, 100, 255]);
    let spot = render_spot(&SpotParams::green_laser([16, 16]), 160)?;

    let open = SearchConfig { pixel_increment: 8, ..SearchConfig::default() };
    let safe = SearchConfig { exclusions: band.clone(), ..open.clone() };
    let a = grid_search(&crop, &spot, &oracle, &open)?;
    let s = grid_search(&crop, &spot, &oracle, &safe)?;
    println!("eye band {b}");
    println!("unrestricted: {:?} conf {:.4} over {} candidates", a.best_placement.centers, a.best_confidence, a.iterations);
    println!("eyes excluded: {:?} conf {:.4} over {} candidates", s.best_placement.centers, s.best_confidence, s.iterations);
    let hit = s.best_placement.footprints(spot.dims()).any(|fp| fp.intersects(&b));
    println!("restricted footprint touches band: {hit}");
    Ok(())
}
