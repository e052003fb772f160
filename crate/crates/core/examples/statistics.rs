//! Prints the statistics block for a small synthetic search.
//!
//! cargo run --example statistics

use std::time::Duration;

use lpo::oracle::{make_synthetic, SyntheticSpec};
use lpo::pipeline::View;
use lpo::raster::{ImageRaster, Rect};
use lpo::report::{emit_stats, StatsContext};
use lpo::search::{grid_search, SearchConfig};
use lpo::spot::{render_spot, SpotParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let oracle = make_synthetic("gauss=30,50,8,0.3;baseline=0.9993".parse::<SyntheticSpec>()?)?;
    let crop = ImageRaster::filled(224, 395, [200, 170, 150, 255]);
    let spot = render_spot(&SpotParams::green_laser([182, 86]), 224)?;
    let config = SearchConfig { pixel_increment: 55, ..SearchConfig::default() };
    let out = grid_search(&crop, &spot, &oracle, &config)?;
    let ctx = StatsContext {
        view: View::Front,
        image_size: [1088, 720],
        working_size: [1088, 720],
        face: Rect::new(428, 189, 652, 584),
        spot_size: spot.dims(),
    };
    print!("{}", emit_stats(Duration::from_secs_f64(1.25), config.pixel_increment, &[(ctx, &out)]));
    Ok(())
}
