//! Speaks the line protocol to the built-in replay server, the same way the
//! pipeline talks to a real detector process.
//!
//! cargo build && cargo run --example oracle_protocol

use std::time::Duration;

use lpo::oracle::protocol::{encode_line, Hello, ScoreRequest};
use lpo::oracle::{confidence_of, SubprocessClient};
use lpo::raster::ImageRaster;
use lpo::OracleRole;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/transcripts/replay_table.json");
    let bin = std::env::current_exe()?
        .parent()
        .and_then(|p| p.parent())
        .map(|d| d.join("lpo"))
        .ok_or("cannot locate target dir")?;
    println!("client hello: {}", encode_line(&Hello::client()));
    let frame = ImageRaster::filled(2, 2, [0, 0, 0, 255]);
    let line = encode_line(&ScoreRequest::from_image(1, &frame));
    println!("request:      {}", line);

    let cmd = format!("{} replay-oracle --table {table}", bin.display());
    let client = SubprocessClient::spawn(&cmd, Some(OracleRole::Fd), Duration::from_secs(10))?;
    let front = ImageRaster::filled(1088, 720, [40, 60, 90, 255]);
    let dets = client.query(&front)?;
    println!("front frame:  {} detection(s), confidence {:.4}, box {}", dets.len(), confidence_of(&dets), dets[0].rect);
    let none = client.query(&ImageRaster::filled(3, 3, [0, 0, 0, 255]))?;
    println!("blank frame:  {} detection(s), confidence {}", none.len(), confidence_of(&none));
    Ok(())
}
