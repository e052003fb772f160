//! Synthetic light-spot perturbations.
//!
//! A spot is an RGBA raster plus the face width it was authored against, so
//! it can be rescaled to whatever face the detector finds. Spots come either
//! from [`render_spot`] (parametric ellipse with soft edge) or from a PNG.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{self, FaceBox, ImageRaster, RasterError, Rect};

#[derive(Debug, Error)]
pub enum SpotError {
    #[error("spot has no visible pixels")]
    Invisible,
    #[error("spot image {0} has no alpha channel")]
    NoAlpha(PathBuf),
    #[error("invalid spot parameters: {0}")]
    InvalidParams(String),
    #[error("invalid spot metadata in {path}: {message}")]
    Metadata { path: PathBuf, message: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpotShape {
    Ellipse,
    /// Alpha mask taken from a PNG, resampled to `size`.
    Mask(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotParams {
    pub colour: [u8; 3],
    pub opacity: f64,
    pub shape: SpotShape,
    pub size: [u32; 2],
    /// Fraction of the radius, measured inward from the rim, over which alpha
    /// fades out. 0 gives a hard edge.
    pub falloff: f64,
}

impl SpotParams {
    /// Compact green laser dot.
    pub fn green_laser(size: [u32; 2]) -> Self {
        SpotParams {
            colour: [76, 255, 92],
            opacity: 0.9,
            shape: SpotShape::Ellipse,
            size,
            falloff: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), SpotError> {
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(SpotError::InvalidParams(format!("opacity {} outside [0, 1]", self.opacity)));
        }
        if !(0.0..=1.0).contains(&self.falloff) {
            return Err(SpotError::InvalidParams(format!("falloff {} outside [0, 1]", self.falloff)));
        }
        if self.size[0] == 0 || self.size[1] == 0 {
            return Err(SpotError::InvalidParams(format!(
                "size {}x{} must be at least 1x1",
                self.size[0], self.size[1]
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpotModel {
    raster: ImageRaster,
    reference_face_width: u32,
    params: Option<SpotParams>,
}

impl SpotModel {
    pub fn new(
        raster: ImageRaster,
        reference_face_width: u32,
        params: Option<SpotParams>,
    ) -> Result<Self, SpotError> {
        if reference_face_width == 0 {
            return Err(SpotError::InvalidParams("reference face width must be positive".into()));
        }
        if !raster.as_bytes().chunks_exact(4).any(|p| p[3] > 0) {
            return Err(SpotError::Invisible);
        }
        Ok(SpotModel { raster, reference_face_width, params })
    }

    pub fn raster(&self) -> &ImageRaster {
        &self.raster
    }

    pub fn reference_face_width(&self) -> u32 {
        self.reference_face_width
    }

    pub fn params(&self) -> Option<&SpotParams> {
        self.params.as_ref()
    }

    pub fn dims(&self) -> [u32; 2] {
        self.raster.dims()
    }
}

/// Radial weight at normalized distance `d` (0 at centre, 1 at the rim).
pub fn edge_weight(d: f64, falloff: f64) -> f64 {
    if falloff <= 0.0 {
        return if d <= 1.0 { 1.0 } else { 0.0 };
    }
    let t = ((d - (1.0 - falloff)) / falloff).clamp(0.0, 1.0);
    1.0 - t * t * (3.0 - 2.0 * t)
}

fn alpha_byte(opacity: f64, weight: f64) -> u8 {
    (255.0 * opacity * weight + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Renders the spot described by `params`.
pub fn render_spot(params: &SpotParams, reference_face_width: u32) -> Result<SpotModel, SpotError> {
    params.validate()?;
    let [w, h] = params.size;
    let [r, g, b] = params.colour;
    let raster = match &params.shape {
        SpotShape::Ellipse => {
            let (rx, ry) = (w as f64 / 2.0, h as f64 / 2.0);
            ImageRaster::from_fn(w, h, |x, y| {
                let dx = (x as f64 + 0.5 - rx) / rx;
                let dy = (y as f64 + 0.5 - ry) / ry;
                let d = (dx * dx + dy * dy).sqrt();
                [r, g, b, alpha_byte(params.opacity, edge_weight(d, params.falloff))]
            })
        }
        SpotShape::Mask(path) => {
            let mask = raster::load_image(path)?;
            let mask = raster::resize_bilinear(&mask, w, h);
            ImageRaster::from_fn(w, h, |x, y| {
                let m = mask.pixel(x, y)[3] as f64 / 255.0;
                [r, g, b, alpha_byte(params.opacity, m)]
            })
        }
    };
    SpotModel::new(raster, reference_face_width, Some(params.clone()))
}

/// Loads a spot PNG verbatim. The file must carry an alpha channel.
pub fn load_spot(path: impl AsRef<Path>, reference_face_width: u32) -> Result<SpotModel, SpotError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| RasterError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png).map_err(|e| {
        RasterError::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })?;
    if !decoded.color().has_alpha() {
        return Err(SpotError::NoAlpha(path.to_path_buf()));
    }
    let rgba = decoded.to_rgba8();
    let (w, h) = rgba.dimensions();
    let raster = ImageRaster::new(w, h, rgba.into_raw())?;
    SpotModel::new(raster, reference_face_width, None)
}

/// Sidecar path for a spot PNG: `lightspot.png` -> `lightspot.png.meta`.
pub fn sidecar_path(spot_path: &Path) -> PathBuf {
    let mut name = spot_path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Reads `reference_face_width` from a `key = value` sidecar file, if present.
pub fn read_sidecar(spot_path: &Path) -> Result<Option<u32>, SpotError> {
    let meta = sidecar_path(spot_path);
    let text = match std::fs::read_to_string(&meta) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => {
            return Err(SpotError::Metadata {
                path: meta,
                message: e.to_string(),
            })
        }
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(SpotError::Metadata {
                path: meta,
                message: format!("expected key = value, got {line:?}"),
            });
        };
        if key.trim() == "reference_face_width" {
            return value
                .trim()
                .parse()
                .map(Some)
                .map_err(|e| SpotError::Metadata {
                    path: meta.clone(),
                    message: format!("reference_face_width: {e}"),
                });
        }
    }
    Ok(None)
}

pub fn write_sidecar(spot_path: &Path, reference_face_width: u32) -> std::io::Result<()> {
    std::fs::write(
        sidecar_path(spot_path),
        format!("reference_face_width = {reference_face_width}\n"),
    )
}

/// Rescales `spot` by `face width / reference face width`.
pub fn rescale_spot(spot: &SpotModel, face: &FaceBox) -> SpotModel {
    let face_width = face.width();
    assert!(face_width > 0, "face width must be positive");
    let s = face_width as f64 / spot.reference_face_width as f64;
    let [w, h] = spot.dims();
    let nw = ((w as f64 * s).round() as u32).max(1);
    let nh = ((h as f64 * s).round() as u32).max(1);
    let raster = raster::resize_bilinear(&spot.raster, nw, nh);
    let params = spot.params.clone().map(|p| SpotParams { size: [nw, nh], ..p });
    SpotModel {
        raster,
        reference_face_width: face_width,
        params,
    }
}

/// Channel-wise mean colour of `region`, rounded half-up.
pub fn sample_colour(image: &ImageRaster, region: &Rect) -> Result<[u8; 3], RasterError> {
    let r = region.clamp_to(image.width(), image.height());
    if r.is_empty() {
        return Err(RasterError::OutsideImage(*region, image.width(), image.height()));
    }
    let mut sums = [0u64; 3];
    for y in r.y1..r.y2 {
        for x in r.x1..r.x2 {
            let p = image.pixel(x as u32, y as u32);
            for c in 0..3 {
                sums[c] += p[c] as u64;
            }
        }
    }
    let n = (r.width() as u64) * (r.height() as u64);
    Ok(sums.map(|s| ((2 * s + n) / (2 * n)) as u8))
}
