//! Differential evolution on a 200x200 crop with a single gaussian well.
//! Prints how close each seed lands to the planted optimum.
//!
//! cargo run --release --example de_search_synthetic

use lpo::oracle::{make_synthetic, GaussianWell, SyntheticSpec};
use lpo::raster::ImageRaster;
use lpo::search::{de_search, SearchConfig, Strategy};
use lpo::spot::{render_spot, SpotParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let planted = [137.0, 71.0];
    let oracle = make_synthetic(SyntheticSpec::Gaussians {
        baseline: 0.99,
        wells: vec![GaussianWell { center: planted, sigma: 30.0, depth: 0.6 }],
    })?;
    let crop = ImageRaster::filled(200, 200, [90, 90, 90, 255]);
    let spot = render_spot(&SpotParams::green_laser([16, 16]), 200)?;
    let mut config = SearchConfig {
        strategy: Strategy::DifferentialEvolution,
        ..SearchConfig::default()
    };
    config.de.population = 20;
    config.de.generations = 50;

    for seed in 0..5 {
        config.de.seed = seed;
        let out = de_search(&crop, &spot, &oracle, &config)?;
        let c = out.best_placement.centers[0];
        let d = ((c[0] as f64 - planted[0]).powi(2) + (c[1] as f64 - planted[1]).powi(2)).sqrt();
        println!(
            "seed {seed}: {:?} conf {:.4} after {} evaluations, {d:.1} px off",
            c, out.best_confidence, out.iterations
        );
    }
    Ok(())
}
