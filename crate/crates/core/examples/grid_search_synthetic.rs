//! Exhaustive lattice search against a synthetic detector with one planted
//! well, for one and two spots.
//!
//! cargo run --example grid_search_synthetic

use lpo::oracle::{make_synthetic, SyntheticSpec};
use lpo::raster::ImageRaster;
use lpo::search::{binomial, enumerate_placements, grid_search, SearchConfig};
use lpo::spot::{render_spot, SpotParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec: SyntheticSpec = "gauss=70,45,12,0.6;baseline=0.99".parse()?;
    let oracle = make_synthetic(spec)?;
    let crop = ImageRaster::filled(120, 100, [120, 100, 90, 255]);
    let spot = render_spot(&SpotParams::green_laser([16, 16]), 120)?;

    for k in [1, 2] {
        let config = SearchConfig {
            pixel_increment: 10,
            spot_count: k,
            workers: 0,
            ..SearchConfig::default()
        };
        let set = enumerate_placements(crop.dims(), spot.dims(), &config)?;
        let p = set.grid().len() as u64;
        let out = grid_search(&crop, &spot, &oracle, &config)?;
        println!(
            "k={k}: P={p}, C(P+k-1,k)={}, iterations={}, best {:?} at {:.4} (index {})",
            binomial(p + k as u64 - 1, k as u64),
            out.iterations,
            out.best_placement.centers,
            out.best_confidence,
            out.lowest_confidence_index
        );
    }
    Ok(())
}
