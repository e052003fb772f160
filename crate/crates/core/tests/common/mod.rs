//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use lpo::raster::{self, FaceBox, ImageRaster, Rect};
use lpo::search::Placement;
use lpo::spot::{render_spot, rescale_spot, SpotModel, SpotParams};

pub fn lpo_bin() -> &'static str {
    env!("CARGO_BIN_EXE_lpo")
}

pub const FRAME: [u32; 2] = [1088, 720];
pub const PIX_INCR: u32 = 55;

/// Per-view replayed values: face box, FD initial, FD at the LPO optimum, FD
/// elsewhere in the search, FD final, FR initial, FR final, planted index.
pub struct ViewFixture {
    pub key: &'static str,
    pub background: [u8; 3],
    pub face: [i32; 4],
    pub fd_initial: f64,
    pub fd_lpo: f64,
    pub fd_other: f64,
    pub fd_final: f64,
    pub fr_initial: f64,
    pub fr_final: f64,
    pub planted_index: u32,
}

pub const VIEWS: [ViewFixture; 3] = [
    ViewFixture {
        key: "front",
        background: [40, 60, 90],
        face: [428, 189, 652, 584],
        fd_initial: 0.9993,
        fd_lpo: 0.9981,
        fd_other: 0.9990,
        fd_final: 0.9964,
        fr_initial: 0.4299,
        fr_final: 0.4789,
        planted_index: 4,
    },
    ViewFixture {
        key: "left",
        background: [90, 40, 60],
        face: [369, 193, 627, 507],
        fd_initial: 0.9995,
        fd_lpo: 0.9991,
        fd_other: 0.9994,
        fd_final: 0.9975,
        fr_initial: 0.2428,
        fr_final: 0.5556,
        planted_index: 3,
    },
    ViewFixture {
        key: "right",
        background: [60, 90, 40],
        face: [477, 217, 721, 532],
        fd_initial: 0.9768,
        fd_lpo: 0.9589,
        fd_other: 0.9700,
        fd_final: 0.9903,
        fr_initial: 0.3512,
        fr_final: 0.0588,
        planted_index: 4,
    },
];

/// Pixel that marks an adjusted photo.
pub const ADJUSTED_MARK: [u8; 3] = [255, 0, 255];

/// The authored spot: a green laser dot sized for a 112-pixel-wide face, so
/// the front face (224 wide) rescales it to 182x86.
pub fn golden_spot() -> SpotModel {
    render_spot(&SpotParams::green_laser([91, 43]), 112).unwrap()
}

fn face_rect(v: &ViewFixture) -> Rect {
    Rect::new(v.face[0], v.face[1], v.face[2], v.face[3])
}

/// Centre of the planted position, crop-local: one column, rows stepping by
/// the increment.
pub fn planted_center(v: &ViewFixture, spot: [u32; 2]) -> [i32; 2] {
    [(spot[0] / 2) as i32, (v.planted_index * PIX_INCR + spot[1] / 2) as i32]
}

pub struct GoldenInputs {
    pub dir: PathBuf,
    pub originals: [PathBuf; 3],
    pub adjusted: [PathBuf; 3],
    pub manifest: PathBuf,
    pub fd_table: PathBuf,
    pub fr_table: PathBuf,
}

impl GoldenInputs {
    pub fn fd_spec(&self) -> String {
        format!("cmd:{} replay-oracle --table {}", lpo_bin(), self.fd_table.display())
    }

    pub fn fr_spec(&self) -> String {
        format!("cmd:{} replay-oracle --table {}", lpo_bin(), self.fr_table.display())
    }
}

fn det(face: [i32; 4], confidence: f64, label: Option<&str>) -> Value {
    match label {
        Some(l) => json!({"box": face, "confidence": confidence, "label": l}),
        None => json!({"box": face, "confidence": confidence}),
    }
}

fn probe(x: u32, y: u32, rgb: [u8; 3], tolerance: u8) -> Value {
    json!({"x": x, "y": y, "rgb": rgb, "tolerance": tolerance})
}

/// Writes frames, adjusted photos, manifest and both replay tables into `dir`.
pub fn write_golden_inputs(dir: &Path) -> GoldenInputs {
    std::fs::create_dir_all(dir).unwrap();
    let spot = golden_spot();
    let mut fd_rules = Vec::new();
    let mut fr_rules = Vec::new();
    let mut originals = Vec::new();
    let mut adjusted = Vec::new();
    let [w, h] = FRAME;

    // adjusted photos first: their rules are the more specific ones
    for v in &VIEWS {
        let [r, g, b] = v.background;
        let mut img = ImageRaster::filled(w, h, [r, g, b, 255]);
        let [mr, mg, mb] = ADJUSTED_MARK;
        img.set_pixel(0, 0, [mr, mg, mb, 255]);
        let path = dir.join(format!("{}_adjusted.png", v.key));
        img.save_png(&path).unwrap();
        adjusted.push(path);
        let probes = vec![probe(0, 0, ADJUSTED_MARK, 0), probe(2, 2, v.background, 0)];
        fd_rules.push(json!({"width": w, "height": h, "probes": probes, "detections": [det(v.face, v.fd_final, None)]}));
        fr_rules.push(json!({"width": w, "height": h, "probes": probes, "detections": [det(v.face, v.fr_final, Some("attacker"))]}));
    }

    for v in &VIEWS {
        let [r, g, b] = v.background;
        let img = ImageRaster::filled(w, h, [r, g, b, 255]);
        let path = dir.join(format!("{}.png", v.key));
        img.save_png(&path).unwrap();
        originals.push(path);
        let probes = vec![probe(2, 2, v.background, 0)];
        fd_rules.push(json!({"width": w, "height": h, "probes": probes, "detections": [det(v.face, v.fd_initial, None)]}));
        fr_rules.push(json!({"width": w, "height": h, "probes": probes, "detections": [det(v.face, v.fr_initial, Some("attacker"))]}));

        // search queries see the face crop with the spot composited
        let rect = face_rect(v);
        let crop = raster::crop(&img, &rect).unwrap();
        let scaled = rescale_spot(&spot, &FaceBox::new(rect, v.fd_initial).unwrap());
        let center = planted_center(v, scaled.dims());
        let lit = lpo::search::apply_placement(&crop, scaled.raster(), &Placement::single(center[0], center[1]));
        let p = lit.pixel(center[0] as u32, center[1] as u32);
        let crop_box = [0, 0, crop.width() as i32, crop.height() as i32];
        fd_rules.push(json!({
            "width": crop.width(), "height": crop.height(),
            "probes": [probe(center[0] as u32, center[1] as u32, [p[0], p[1], p[2]], 0)],
            "detections": [det(crop_box, v.fd_lpo, None)]
        }));
        fd_rules.push(json!({
            "width": crop.width(), "height": crop.height(),
            "detections": [det(crop_box, v.fd_other, None)]
        }));
    }

    let fd_table = dir.join("fd_table.json");
    let fr_table = dir.join("fr_table.json");
    let write = |path: &Path, kind: &str, rules: Vec<Value>| {
        let table = json!({"kind": kind, "rules": rules});
        std::fs::write(path, serde_json::to_string_pretty(&table).unwrap()).unwrap();
    };
    write(&fd_table, "fd", fd_rules);
    write(&fr_table, "fr", fr_rules);

    let manifest = dir.join("manifest.txt");
    std::fs::write(&manifest, "front_adjusted.png\nleft_adjusted.png\nright_adjusted.png\n").unwrap();

    GoldenInputs {
        dir: dir.to_path_buf(),
        originals: originals.try_into().unwrap(),
        adjusted: adjusted.try_into().unwrap(),
        manifest,
        fd_table,
        fr_table,
    }
}

/// Arguments for `lpo run` over the golden inputs.
pub fn golden_run_args(inputs: &GoldenInputs, out: &Path) -> Vec<String> {
    let s = |p: &Path| p.display().to_string();
    vec![
        "run".into(),
        "--front".into(),
        s(&inputs.originals[0]),
        "--left".into(),
        s(&inputs.originals[1]),
        "--right".into(),
        s(&inputs.originals[2]),
        "--pix-incr".into(),
        PIX_INCR.to_string(),
        "--fd-oracle".into(),
        inputs.fd_spec(),
        "--fr-oracle".into(),
        inputs.fr_spec(),
        "--out".into(),
        s(out),
        "--spot-size".into(),
        "91x43".into(),
        "--spot-ref-width".into(),
        "112".into(),
        "--manifest".into(),
        s(&inputs.manifest),
        "--env".into(),
        "N".into(),
    ]
}
