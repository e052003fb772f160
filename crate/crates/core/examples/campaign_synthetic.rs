//! A full two-phase campaign with in-process synthetic oracles. The
//! "adjusted" photos are the originals, so final scores equal initial ones.
//!
//! cargo run --example campaign_synthetic -- [out_dir]

use std::path::PathBuf;

use lpo::oracle::make_synthetic;
use lpo::pipeline::{
    await_adjusted_images, phase1_recommend, phase2_score, AdjustedSource, CampaignConfig, SpotMode, SpotSummary, View,
    ViewSet,
};
use lpo::raster::ImageRaster;
use lpo::report::campaign_statistics;
use lpo::search::SearchConfig;
use lpo::spot::{render_spot, SpotParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-campaign".into()));
    let inputs = out.join("inputs");
    std::fs::create_dir_all(&inputs)?;

    let mut paths = Vec::new();
    for (i, view) in View::ALL.iter().enumerate() {
        let img = ImageRaster::from_fn(128, 96, |x, y| [(x * 2) as u8, (y * 2) as u8, 60 + 40 * i as u8, 255]);
        let p = inputs.join(format!("{view}.png"));
        img.save_png(&p)?;
        paths.push(p);
    }
    let manifest = inputs.join("manifest.txt");
    std::fs::write(&manifest, "front.png\nleft.png\nright.png\n")?;

    let fd_spec = "gauss=40,30,12,0.4;baseline=0.97";
    let fr_spec = "constant=0.55";
    let fd = make_synthetic(fd_spec.parse()?)?;
    let fr = make_synthetic(fr_spec.parse()?)?;
    let spot = render_spot(&SpotParams::green_laser([12, 12]), 128)?;
    let config = CampaignConfig {
        search: SearchConfig { pixel_increment: 8, ..SearchConfig::default() },
        exclude_eyes: true,
        downscale: None,
        fd_oracle: format!("synthetic:{fd_spec}"),
        fr_oracle: format!("synthetic:{fr_spec}"),
        spot: SpotSummary::of(&spot, "rendered"),
        environment: None,
    };

    let views = ViewSet::load([&paths[0], &paths[1], &paths[2]], SpotMode::Laser)?;
    let partial = phase1_recommend(&views, &fd, &fr, &spot, &config, &out)?;
    print!("{}", campaign_statistics(&partial));

    let adjusted = await_adjusted_images(AdjustedSource::Manifest(&manifest))?;
    let done = phase2_score(&partial, &adjusted, &fd, &fr, &out)?;
    for v in &done.views {
        println!(
            "{}: recommendation {:?}, FD {:.4} -> {:.4}",
            v.view.title(),
            v.recommendation.centers,
            v.initial_fd.confidence,
            v.final_fd.as_ref().map_or(0.0, |d| d.confidence)
        );
    }
    println!("record and images in {}", out.display());
    Ok(())
}
