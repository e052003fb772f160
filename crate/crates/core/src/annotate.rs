//! Burns bounding boxes and captions into output images.

use font8x8::{UnicodeFonts, BASIC_FONTS};

use crate::raster::{ImageRaster, Rect};

pub const BOX_COLOUR: [u8; 4] = [0, 255, 0, 255];
const TEXT_BG: [u8; 4] = [0, 0, 0, 255];
const GLYPH: i32 = 8;

/// Draws a rectangle outline `thickness` pixels wide, clipped to the image.
pub fn draw_rect(image: &mut ImageRaster, rect: &Rect, thickness: u32, colour: [u8; 4]) {
    let t = thickness as i32;
    let edges = [
        Rect::new(rect.x1, rect.y1, rect.x2, rect.y1 + t),
        Rect::new(rect.x1, rect.y2 - t, rect.x2, rect.y2),
        Rect::new(rect.x1, rect.y1, rect.x1 + t, rect.y2),
        Rect::new(rect.x2 - t, rect.y1, rect.x2, rect.y2),
    ];
    for edge in edges {
        fill_rect(image, &edge, colour);
    }
}

pub fn fill_rect(image: &mut ImageRaster, rect: &Rect, colour: [u8; 4]) {
    let r = rect.clamp_to(image.width(), image.height());
    for y in r.y1..r.y2 {
        for x in r.x1..r.x2 {
            image.set_pixel(x as u32, y as u32, colour);
        }
    }
}

/// Renders `text` with the embedded 8x8 font at integer `scale`, on a solid
/// background strip. Characters without a glyph render as `?`.
pub fn draw_text(image: &mut ImageRaster, origin: [i32; 2], text: &str, scale: u32, colour: [u8; 4]) {
    let s = scale.max(1) as i32;
    let width = text.chars().count() as i32 * GLYPH * s;
    fill_rect(
        image,
        &Rect::new(origin[0], origin[1], origin[0] + width, origin[1] + GLYPH * s),
        TEXT_BG,
    );
    for (i, ch) in text.chars().enumerate() {
        let glyph = BASIC_FONTS
            .get(ch)
            .or_else(|| BASIC_FONTS.get('?'))
            .unwrap_or([0; 8]);
        let gx = origin[0] + i as i32 * GLYPH * s;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..8 {
                if bits & (1 << col) == 0 {
                    continue;
                }
                let x = gx + col * s;
                let y = origin[1] + row as i32 * s;
                fill_rect(image, &Rect::new(x, y, x + s, y + s), colour);
            }
        }
    }
}

/// Box plus a caption placed above it (or inside, when there's no room).
pub fn annotate_detection(image: &mut ImageRaster, rect: &Rect, caption: &str) {
    let scale = (image.width() / 400).clamp(1, 4);
    draw_rect(image, rect, scale + 1, BOX_COLOUR);
    let text_h = GLYPH * scale as i32;
    let y = if rect.y1 - text_h - 2 >= 0 { rect.y1 - text_h - 2 } else { rect.y1 + 2 };
    draw_text(image, [rect.x1.max(0), y], caption, scale, BOX_COLOUR);
}

/// `Confidence = 99.93%`
pub fn confidence_caption(confidence: f64) -> String {
    format!("Confidence = {:.2}%", confidence * 100.0)
}
