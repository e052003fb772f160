//! RGBA rasters and the handful of pixel operations the optimizer needs:
//! decoding, cropping, face normalization, source-over compositing and
//! box-filter downscaling.
//!
//! Everything is 8-bit RGBA, row-major. Operations never mutate their inputs.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("failed to read image {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("failed to encode image {path}: {message}")]
    Encode { path: PathBuf, message: String },
    #[error("invalid raster: {0}")]
    Invalid(String),
    #[error("box {0} lies entirely outside the {1}x{2} image")]
    OutsideImage(Rect, u32, u32),
    #[error("downscale target {target_w}x{target_h} exceeds source {width}x{height}")]
    Upscale {
        width: u32,
        height: u32,
        target_w: u32,
        target_h: u32,
    },
}

/// Axis-aligned pixel rectangle, half-open: `[x1, x2) x [y1, y2)`.
///
/// Coordinates may be negative or degenerate; use [`Rect::clamp_to`] before
/// indexing pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x1: i32,
    pub y1: i32,
    pub x2: i32,
    pub y2: i32,
}

impl Rect {
    pub const fn new(x1: i32, y1: i32, x2: i32, y2: i32) -> Self {
        Rect { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> i32 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> i32 {
        self.y2 - self.y1
    }

    pub fn is_empty(&self) -> bool {
        self.x2 <= self.x1 || self.y2 <= self.y1
    }

    /// True when the two rectangles share a region of positive area.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.x1.max(other.x1) < self.x2.min(other.x2)
            && self.y1.max(other.y1) < self.y2.min(other.y2)
    }

    pub fn clamp_to(&self, width: u32, height: u32) -> Rect {
        let (w, h) = (width as i32, height as i32);
        Rect {
            x1: self.x1.clamp(0, w),
            y1: self.y1.clamp(0, h),
            x2: self.x2.clamp(0, w),
            y2: self.y2.clamp(0, h),
        }
    }

    pub fn as_array(&self) -> [i32; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} {} {} {}]", self.x1, self.y1, self.x2, self.y2)
    }
}

/// A detected face: an in-bounds rectangle with the detector's confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    #[serde(rename = "box")]
    pub rect: Rect,
    pub confidence: f64,
}

impl FaceBox {
    pub fn new(rect: Rect, confidence: f64) -> Result<Self, RasterError> {
        if rect.x1 < 0 || rect.y1 < 0 || rect.is_empty() {
            return Err(RasterError::Invalid(format!("face box {rect} is not a valid region")));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(RasterError::Invalid(format!(
                "face confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(FaceBox { rect, confidence })
    }

    pub fn width(&self) -> u32 {
        self.rect.width() as u32
    }

    pub fn height(&self) -> u32 {
        self.rect.height() as u32
    }
}

/// Row-major 8-bit RGBA image.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ImageRaster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl fmt::Debug for ImageRaster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageRaster")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageRaster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Invalid(format!("zero-sized raster {width}x{height}")));
        }
        let expected = width as usize * height as usize * 4;
        if pixels.len() != expected {
            return Err(RasterError::Invalid(format!(
                "expected {expected} bytes for {width}x{height} RGBA, got {}",
                pixels.len()
            )));
        }
        Ok(ImageRaster { width, height, pixels })
    }

    /// A raster filled with one colour.
    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Self {
        assert!(width > 0 && height > 0, "zero-sized raster");
        let pixels = rgba
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 4)
            .collect();
        ImageRaster { width, height, pixels }
    }

    /// Builds a raster by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 4]) -> Self {
        assert!(width > 0 && height > 0, "zero-sized raster");
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 4);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        ImageRaster { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> [u32; 2] {
        [self.width, self.height]
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2], self.pixels[o + 3]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgba: [u8; 4]) {
        let o = self.offset(x, y);
        self.pixels[o..o + 4].copy_from_slice(&rgba);
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, 0, self.width as i32, self.height as i32)
    }

    pub fn has_transparency(&self) -> bool {
        self.pixels.chunks_exact(4).any(|p| p[3] < 255)
    }

    /// Decodes PNG or JPEG bytes. JPEG (and any alpha-less PNG) gets alpha 255.
    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        let img = image::load_from_memory(bytes).map_err(|e| e.to_string())?;
        let rgba = img.to_rgba8();
        let (w, h) = rgba.dimensions();
        ImageRaster::new(w, h, rgba.into_raw()).map_err(|e| e.to_string())
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let encoder = image::codecs::png::PngEncoder::new(&mut out);
        image::ImageEncoder::write_image(
            encoder,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgba8,
        )
        .expect("encoding RGBA8 into memory cannot fail");
        out
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let path = path.as_ref();
        std::fs::write(path, self.encode_png()).map_err(|e| RasterError::Encode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Loads a PNG or JPEG file.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRaster, RasterError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| RasterError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    match image::guess_format(&bytes) {
        Ok(image::ImageFormat::Png | image::ImageFormat::Jpeg) => {}
        Ok(other) => {
            return Err(RasterError::Decode {
                path: path.to_path_buf(),
                message: format!("unsupported format {other:?}"),
            })
        }
        Err(e) => {
            return Err(RasterError::Decode {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        }
    }
    ImageRaster::decode(&bytes).map_err(|message| RasterError::Decode {
        path: path.to_path_buf(),
        message,
    })
}

/// Crops `image` to `rect` after clamping it to the image bounds.
pub fn crop(image: &ImageRaster, rect: &Rect) -> Result<ImageRaster, RasterError> {
    let r = rect.clamp_to(image.width, image.height);
    if r.is_empty() {
        return Err(RasterError::OutsideImage(*rect, image.width, image.height));
    }
    let (w, h) = (r.width() as u32, r.height() as u32);
    let mut pixels = Vec::with_capacity(w as usize * h as usize * 4);
    for y in r.y1 as u32..r.y2 as u32 {
        let start = image.offset(r.x1 as u32, y);
        pixels.extend_from_slice(&image.pixels[start..start + w as usize * 4]);
    }
    Ok(ImageRaster { width: w, height: h, pixels })
}

#[inline]
fn round_half_up(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Bilinear resample to exactly `width` x `height`, pixel-centre aligned.
pub fn resize_bilinear(image: &ImageRaster, width: u32, height: u32) -> ImageRaster {
    assert!(width > 0 && height > 0, "zero-sized resize target");
    if width == image.width && height == image.height {
        return image.clone();
    }
    let sx = image.width as f64 / width as f64;
    let sy = image.height as f64 / height as f64;
    let max_x = (image.width - 1) as f64;
    let max_y = (image.height - 1) as f64;

    ImageRaster::from_fn(width, height, |x, y| {
        let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let x0 = fx.floor() as u32;
        let y0 = fy.floor() as u32;
        let x1 = (x0 + 1).min(image.width - 1);
        let y1 = (y0 + 1).min(image.height - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let (p00, p10) = (image.pixel(x0, y0), image.pixel(x1, y0));
        let (p01, p11) = (image.pixel(x0, y1), image.pixel(x1, y1));
        let mut out = [0u8; 4];
        for c in 0..4 {
            let top = p00[c] as f64 * (1.0 - tx) + p10[c] as f64 * tx;
            let bottom = p01[c] as f64 * (1.0 - tx) + p11[c] as f64 * tx;
            out[c] = round_half_up(top * (1.0 - ty) + bottom * ty);
        }
        out
    })
}

/// Resizes a face crop to `target_width`, preserving aspect ratio.
///
/// Returns the normalized raster and the scale factor `target_width / width`.
pub fn normalize_face(crop: &ImageRaster, target_width: u32) -> (ImageRaster, f64) {
    assert!(target_width > 0, "target width must be positive");
    let scale = target_width as f64 / crop.width as f64;
    let height = ((crop.height as f64 * scale).round() as u32).max(1);
    (resize_bilinear(crop, target_width, height), scale)
}

/// Top-left corner of a `w` x `h` footprint centred on `center`.
#[inline]
pub fn footprint_origin(center: [i32; 2], w: u32, h: u32) -> [i32; 2] {
    [center[0] - (w / 2) as i32, center[1] - (h / 2) as i32]
}

/// Pixel rectangle covered by a `w` x `h` spot centred on `center`.
pub fn footprint(center: [i32; 2], w: u32, h: u32) -> Rect {
    let [x, y] = footprint_origin(center, w, h);
    Rect::new(x, y, x + w as i32, y + h as i32)
}

/// Source-over blend of `spot` onto a copy of `base`, centred on `center`.
///
/// Colour channels use `out = spot * a + base * (1 - a)` with `a = alpha / 255`,
/// rounded half-up. Output alpha is `a + base_alpha * (1 - a)`. The spot is
/// clipped at the base edges.
pub fn composite(base: &ImageRaster, spot: &ImageRaster, center: [i32; 2]) -> ImageRaster {
    let mut out = base.clone();
    composite_in_place(&mut out, spot, center);
    out
}

pub(crate) fn composite_in_place(base: &mut ImageRaster, spot: &ImageRaster, center: [i32; 2]) {
    let fp = footprint(center, spot.width, spot.height);
    let clip = fp.clamp_to(base.width, base.height);
    if clip.is_empty() {
        return;
    }
    for by in clip.y1..clip.y2 {
        let sy = (by - fp.y1) as u32;
        for bx in clip.x1..clip.x2 {
            let sx = (bx - fp.x1) as u32;
            let s = spot.pixel(sx, sy);
            let a = s[3] as u32;
            if a == 0 {
                continue;
            }
            let o = base.offset(bx as u32, by as u32);
            let px = &mut base.pixels[o..o + 4];
            for c in 0..3 {
                px[c] = blend_channel(s[c], px[c], a);
            }
            px[3] = blend_channel(255, px[3], a);
        }
    }
}

/// `round_half_up((s * a + b * (255 - a)) / 255)` in exact integer arithmetic.
#[inline]
pub fn blend_channel(spot: u8, base: u8, alpha: u32) -> u8 {
    let v = spot as u32 * alpha + base as u32 * (255 - alpha);
    ((2 * v + 255) / 510) as u8
}

/// Area-weighted box-filter downsample to exactly `target_w` x `target_h`.
///
/// Each output pixel is the coverage-weighted mean of the source pixels its
/// footprint overlaps, rounded half-up. Only reduces; upscaling is an error.
pub fn downscale(image: &ImageRaster, target_w: u32, target_h: u32) -> Result<ImageRaster, RasterError> {
    if target_w == 0 || target_h == 0 || target_w > image.width || target_h > image.height {
        return Err(RasterError::Upscale {
            width: image.width,
            height: image.height,
            target_w,
            target_h,
        });
    }
    if target_w == image.width && target_h == image.height {
        return Ok(image.clone());
    }
    let xw = box_weights(image.width, target_w);
    let yw = box_weights(image.height, target_h);
    let mut pixels = Vec::with_capacity(target_w as usize * target_h as usize * 4);
    for row in &yw {
        for col in &xw {
            let mut acc = [0f64; 4];
            let mut total = 0f64;
            for &(sy, wy) in row {
                for &(sx, wx) in col {
                    let w = wx * wy;
                    let p = image.pixel(sx, sy);
                    for c in 0..4 {
                        acc[c] += p[c] as f64 * w;
                    }
                    total += w;
                }
            }
            for a in acc {
                // exact halves like 127.5 must survive the float division
                pixels.push(round_half_up(a / total + 1e-9));
            }
        }
    }
    Ok(ImageRaster { width: target_w, height: target_h, pixels })
}

/// For every output index, the source indices and their coverage weights.
/// Weights are in source-pixel units scaled by `dst` so they stay integral.
fn box_weights(src: u32, dst: u32) -> Vec<Vec<(u32, f64)>> {
    // Output pixel i covers [i*src, (i+1)*src) in units of 1/dst source pixels.
    (0..dst)
        .map(|i| {
            let lo = i as u64 * src as u64;
            let hi = lo + src as u64;
            let first = (lo / dst as u64) as u32;
            let last = ((hi - 1) / dst as u64) as u32;
            (first..=last)
                .map(|s| {
                    let s_lo = s as u64 * dst as u64;
                    let s_hi = s_lo + dst as u64;
                    let cover = hi.min(s_hi) - lo.max(s_lo);
                    (s, cover as f64)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: u32, h: u32, values: &[u8]) -> ImageRaster {
        ImageRaster::from_fn(w, h, |x, y| {
            let v = values[(y * w + x) as usize];
            [v, v, v, 255]
        })
    }

    #[test]
    fn rejects_bad_pixel_count() {
        assert!(ImageRaster::new(2, 2, vec![0; 15]).is_err());
        assert!(ImageRaster::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn single_red_pixel_png_round_trip() {
        let img = ImageRaster::new(1, 1, vec![255, 0, 0, 255]).unwrap();
        let back = ImageRaster::decode(&img.encode_png()).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.as_bytes(), &[255, 0, 0, 255]);
    }

    #[test]
    fn load_reports_path_on_missing_and_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.png");
        let err = load_image(&missing).unwrap_err().to_string();
        assert!(err.contains("nope.png"), "{err}");

        let corrupt = dir.path().join("corrupt.png");
        std::fs::write(&corrupt, b"\x89PNG\r\n\x1a\nnot really").unwrap();
        let err = load_image(&corrupt).unwrap_err().to_string();
        assert!(err.contains("corrupt.png"), "{err}");

        let text = dir.path().join("text.png");
        std::fs::write(&text, b"hello").unwrap();
        assert!(matches!(load_image(&text), Err(RasterError::Decode { .. })));
    }

    #[test]
    fn jpeg_decodes_opaque() {
        let img = ImageRaster::from_fn(8, 8, |x, y| [(x * 30) as u8, (y * 30) as u8, 90, 255]);
        let rgb = image::RgbImage::from_fn(8, 8, |x, y| {
            let p = img.pixel(x, y);
            image::Rgb([p[0], p[1], p[2]])
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jpg");
        rgb.save(&path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.dims(), [8, 8]);
        assert!(back.as_bytes().chunks(4).all(|p| p[3] == 255));
    }

    #[test]
    fn crop_face_location_dimensions() {
        let img = ImageRaster::filled(1088, 720, [10, 20, 30, 255]);
        let c = crop(&img, &Rect::new(428, 189, 652, 584)).unwrap();
        assert_eq!(c.dims(), [224, 395]);
    }

    #[test]
    fn crop_whole_image_is_identity() {
        let img = ImageRaster::from_fn(5, 4, |x, y| [x as u8, y as u8, 7, 255]);
        assert_eq!(crop(&img, &img.full_rect()).unwrap(), img);
    }

    #[test]
    fn crop_clamps_and_rejects_outside() {
        let img = ImageRaster::filled(10, 10, [0, 0, 0, 255]);
        let c = crop(&img, &Rect::new(-5, 8, 3, 20)).unwrap();
        assert_eq!(c.dims(), [3, 2]);
        let err = crop(&img, &Rect::new(20, 20, 30, 30)).unwrap_err();
        assert!(err.to_string().contains("[20 20 30 30]"));
    }

    #[test]
    fn normalize_noop_and_doubling() {
        let c = ImageRaster::filled(224, 395, [1, 2, 3, 255]);
        let (same, s) = normalize_face(&c, 224);
        assert_eq!(same.dims(), [224, 395]);
        assert_eq!(s, 1.0);
        let (big, s) = normalize_face(&c, 448);
        assert_eq!(big.dims(), [448, 790]);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn normalize_height_never_zero() {
        let c = ImageRaster::filled(100, 1, [1, 2, 3, 255]);
        let (out, _) = normalize_face(&c, 10);
        assert_eq!(out.dims(), [10, 1]);
    }

    #[test]
    fn blend_half_alpha_scalar_reference() {
        // (200*128 + 100*127) / 255 = 150.196..., half-up -> 150
        let exact = (200.0 * 128.0 + 100.0 * 127.0) / 255.0_f64;
        assert_eq!(blend_channel(200, 100, 128), (exact + 0.5).floor() as u8);
        assert_eq!(blend_channel(200, 100, 128), 150);
    }

    #[test]
    fn blend_matches_float_reference_for_all_alphas() {
        for a in 0..=255u32 {
            for (s, b) in [(0u8, 255u8), (255, 0), (17, 200), (1, 0)] {
                let v = s as u32 * a + b as u32 * (255 - a);
                let expect = ((v as f64) / 255.0 + 0.5).floor() as u8;
                assert_eq!(blend_channel(s, b, a), expect, "s={s} b={b} a={a}");
            }
        }
    }

    #[test]
    fn composite_clips_at_edges() {
        let base = ImageRaster::filled(4, 4, [0, 0, 0, 255]);
        let spot = ImageRaster::filled(3, 3, [255, 255, 255, 255]);
        let out = composite(&base, &spot, [0, 0]);
        // footprint [-1,2) x [-1,2)
        assert_eq!(out.pixel(0, 0), [255, 255, 255, 255]);
        assert_eq!(out.pixel(1, 1), [255, 255, 255, 255]);
        assert_eq!(out.pixel(2, 2), [0, 0, 0, 255]);
        assert_eq!(base.pixel(0, 0), [0, 0, 0, 255]);
        assert_eq!(composite(&base, &spot, [100, 100]), base);
    }

    #[test]
    fn downscale_to_227_square() {
        let img = ImageRaster::filled(1088, 720, [5, 6, 7, 255]);
        let d = downscale(&img, 227, 227).unwrap();
        assert_eq!(d.dims(), [227, 227]);
        assert_eq!(d.pixel(100, 100), [5, 6, 7, 255]);
    }

    #[test]
    fn downscale_mean_rounds_half_up() {
        let img = gray(2, 2, &[0, 0, 255, 255]);
        let d = downscale(&img, 1, 1).unwrap();
        assert_eq!(d.pixel(0, 0)[0], 128);
    }

    #[test]
    fn downscale_identity_and_upscale_rejected() {
        let img = gray(3, 2, &[1, 2, 3, 4, 5, 6]);
        assert_eq!(downscale(&img, 3, 2).unwrap(), img);
        assert!(matches!(downscale(&img, 4, 2), Err(RasterError::Upscale { .. })));
        assert!(matches!(downscale(&img, 0, 1), Err(RasterError::Upscale { .. })));
    }

    #[test]
    fn downscale_fractional_coverage() {
        // 3 -> 2: outputs are (a + b/2)/1.5 and (b/2 + c)/1.5
        let img = gray(3, 1, &[0, 90, 180]);
        let d = downscale(&img, 2, 1).unwrap();
        assert_eq!(d.pixel(0, 0)[0], 30);
        assert_eq!(d.pixel(1, 0)[0], 150);
    }

    #[test]
    fn face_box_validation() {
        assert!(FaceBox::new(Rect::new(0, 0, 1, 1), 0.5).is_ok());
        assert!(FaceBox::new(Rect::new(-1, 0, 1, 1), 0.5).is_err());
        assert!(FaceBox::new(Rect::new(2, 0, 1, 1), 0.5).is_err());
        assert!(FaceBox::new(Rect::new(0, 0, 1, 1), 1.5).is_err());
    }
}
