//! Renders a green laser spot, composites it onto a gradient and writes the
//! result next to the spot itself.
//!
//! cargo run --example composite_spot -- [out_dir]

use std::path::PathBuf;

use lpo::raster::{composite, FaceBox, ImageRaster, Rect};
use lpo::spot::{render_spot, rescale_spot, SpotParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out".into()));
    std::fs::create_dir_all(&out)?;

    let base = ImageRaster::from_fn(160, 120, |x, y| [(x + 40) as u8, (y + 60) as u8, 110, 255]);
    // authored for a 112-pixel face, shown on an 80-pixel one
    let spot = render_spot(&SpotParams::green_laser([40, 20]), 112)?;
    let face = FaceBox::new(Rect::new(40, 20, 120, 110), 0.97)?;
    let scaled = rescale_spot(&spot, &face);
    println!("spot {:?} rescaled to {:?}", spot.dims(), scaled.dims());

    let lit = composite(&base, scaled.raster(), [80, 60]);
    let p = lit.pixel(80, 60);
    println!("centre pixel {:?} -> {:?}", base.pixel(80, 60), p);

    spot.raster().save_png(out.join("spot.png"))?;
    lit.save_png(out.join("composite.png"))?;
    println!("wrote {}", out.display());
    Ok(())
}
