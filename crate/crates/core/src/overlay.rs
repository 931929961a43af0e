//! Drawing helpers for annotations: rectangles, tints and a 5x7 bitmap font.

use crate::raster::{Raster, Rect};

pub const GLYPH_W: u32 = 5;
pub const GLYPH_H: u32 = 7;

// Rows top to bottom, bit 4 is the leftmost column.
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        ',' => [0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        '%' => [0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '/' => [0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00],
        '=' => [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00],
        '(' => [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
        ')' => [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
        ' ' => [0x00; 7],
        // unknown characters render as a hollow box
        _ => [0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F],
    }
}

/// Pixel footprint of `text` at integer `scale`, including a 1-unit margin.
pub fn text_extent(text: &str, scale: u32) -> (u32, u32) {
    let n = text.chars().count() as u32;
    let w = if n == 0 { 0 } else { n * (GLYPH_W + 1) - 1 };
    ((w + 2) * scale, (GLYPH_H + 2) * scale)
}

/// Clips `rect` to the image; `None` when nothing remains.
fn clip(img: &Raster, rect: Rect) -> Option<Rect> {
    if rect.x >= img.width() || rect.y >= img.height() {
        return None;
    }
    let width = rect.width.min(img.width() - rect.x);
    let height = rect.height.min(img.height() - rect.y);
    (width > 0 && height > 0).then_some(Rect {
        x: rect.x,
        y: rect.y,
        width,
        height,
    })
}

pub fn fill_rect(img: &mut Raster, rect: Rect, color: [u8; 3]) {
    let Some(r) = clip(img, rect) else { return };
    for y in r.y..r.y + r.height {
        for x in r.x..r.x + r.width {
            img.put(x, y, color);
        }
    }
}

/// Blends `color` over `rect` with the given opacity in [0, 1].
pub fn tint_rect(img: &mut Raster, rect: Rect, color: [u8; 3], alpha: f64) {
    let Some(r) = clip(img, rect) else { return };
    let a = alpha.clamp(0.0, 1.0);
    for y in r.y..r.y + r.height {
        for x in r.x..r.x + r.width {
            let px = img.get(x, y);
            let mut out = [0u8; 3];
            for c in 0..3 {
                let v = f64::from(px[c]) * (1.0 - a) + f64::from(color[c]) * a;
                out[c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
            img.put(x, y, out);
        }
    }
}

/// Outline of `thickness` pixels drawn inside `rect`.
pub fn stroke_rect(img: &mut Raster, rect: Rect, color: [u8; 3], thickness: u32) {
    let t = thickness.min(rect.width).min(rect.height);
    let edges = [
        Rect { height: t, ..rect },
        Rect {
            y: rect.y + rect.height - t,
            height: t,
            ..rect
        },
        Rect { width: t, ..rect },
        Rect {
            x: rect.x + rect.width - t,
            width: t,
            ..rect
        },
    ];
    for e in edges {
        fill_rect(img, e, color);
    }
}

/// Draws `text` on a solid background box with its top-left at (x, y).
/// Returns the box that was painted (before clipping).
pub fn draw_label(
    img: &mut Raster,
    x: u32,
    y: u32,
    text: &str,
    scale: u32,
    fg: [u8; 3],
    bg: [u8; 3],
) -> Rect {
    let scale = scale.max(1);
    let (w, h) = text_extent(text, scale);
    let bbox = Rect {
        x,
        y,
        width: w,
        height: h,
    };
    fill_rect(img, bbox, bg);
    let mut pen_x = x + scale;
    let pen_y = y + scale;
    for ch in text.chars() {
        let rows = glyph(ch);
        for (gy, bits) in rows.iter().enumerate() {
            for gx in 0..GLYPH_W {
                if bits & (1 << (GLYPH_W - 1 - gx)) != 0 {
                    fill_rect(
                        img,
                        Rect {
                            x: pen_x + gx * scale,
                            y: pen_y + gy as u32 * scale,
                            width: scale,
                            height: scale,
                        },
                        fg,
                    );
                }
            }
        }
        pen_x += (GLYPH_W + 1) * scale;
    }
    bbox
}

/// A text scale that keeps labels legible on both thumbnails and 4K frames.
pub fn auto_scale(img: &Raster) -> u32 {
    (img.width().min(img.height()) / 160).clamp(1, 6)
}

pub const HEADLINE_FG: [u8; 3] = [255, 255, 255];
pub const HEADLINE_BG: [u8; 3] = [24, 24, 24];
pub const HEADLINE_MARGIN: u32 = 4;

/// Top-left caption used by every annotated output.
pub fn draw_headline(img: &mut Raster, text: &str) -> Rect {
    draw_label(
        img,
        HEADLINE_MARGIN,
        HEADLINE_MARGIN,
        text,
        auto_scale(img),
        HEADLINE_FG,
        HEADLINE_BG,
    )
}
