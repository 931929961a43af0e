//! Grid localization: classify the whole image, then every tile of an
//! R x C partition cropped from the full-resolution original, and mark the
//! tiles whose label agrees with the whole-image label.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassificationResult, Classifier, Concurrency};
use crate::error::{Error, Result};
use crate::overlay;
use crate::raster::{Raster, Rect, MIN_INPUT_SIDE};

pub const DEFAULT_ROWS: u32 = 4;
pub const DEFAULT_COLS: u32 = 4;
pub const HIGHLIGHT_COLOR: [u8; 3] = [255, 48, 48];
pub const HIGHLIGHT_BORDER: u32 = 3;
pub const HIGHLIGHT_ALPHA: f64 = 0.2;

/// Boundaries `floor(i * extent / parts)` for `i = 0..=parts`.
pub fn boundaries(extent: u32, parts: u32) -> Vec<u32> {
    (0..=parts)
        .map(|i| (u64::from(i) * u64::from(extent) / u64::from(parts)) as u32)
        .collect()
}

/// Row-major tile rectangles that partition a `width x height` image.
pub fn tile_bounds(width: u32, height: u32, rows: u32, cols: u32) -> Result<Vec<Rect>> {
    if rows == 0 || cols == 0 {
        return Err(Error::param("grid", "rows and cols must be positive"));
    }
    if rows > height || cols > width {
        return Err(Error::param(
            "grid",
            format!("{rows}x{cols} grid does not fit a {width}x{height} image"),
        ));
    }
    let ys = boundaries(height, rows);
    let xs = boundaries(width, cols);
    let mut rects = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows as usize {
        for c in 0..cols as usize {
            rects.push(Rect {
                x: xs[c],
                y: ys[r],
                width: xs[c + 1] - xs[c],
                height: ys[r + 1] - ys[r],
            });
        }
    }
    Ok(rects)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileGrid {
    pub rows: u32,
    pub cols: u32,
    pub bounds: Vec<Rect>,
    pub whole: ClassificationResult,
    pub tiles: Vec<ClassificationResult>,
    pub match_mask: Vec<bool>,
}

impl TileGrid {
    pub fn assemble(
        rows: u32,
        cols: u32,
        bounds: Vec<Rect>,
        whole: ClassificationResult,
        tiles: Vec<ClassificationResult>,
    ) -> Self {
        let match_mask = tiles.iter().map(|t| t.label == whole.label).collect();
        TileGrid {
            rows,
            cols,
            bounds,
            whole,
            tiles,
            match_mask,
        }
    }

    pub fn matches(&self) -> usize {
        self.match_mask.iter().filter(|&&m| m).count()
    }
}

/// Makes exactly `1 + rows * cols` backend calls, whole image first. Tiles
/// run in parallel when the backend allows it; the result does not depend
/// on scheduling.
pub fn localize(classifier: &Classifier, img: &Raster, rows: u32, cols: u32) -> Result<TileGrid> {
    let bounds = tile_bounds(img.width(), img.height(), rows, cols)?;
    if let Some((index, r)) = bounds
        .iter()
        .enumerate()
        .find(|(_, r)| r.width < MIN_INPUT_SIDE || r.height < MIN_INPUT_SIDE)
    {
        return Err(Error::TileTooSmall {
            index,
            width: r.width,
            height: r.height,
            min: MIN_INPUT_SIDE,
        });
    }

    let whole = classifier.classify(img)?;
    let classify_tile = |(index, rect): (usize, &Rect)| {
        img.crop(*rect)
            .and_then(|tile| classifier.classify(&tile))
            .map_err(|e| Error::Tile {
                index,
                source: Box::new(e),
            })
    };
    let tiles = match classifier.concurrency() {
        Concurrency::ConcurrentSafe => bounds
            .par_iter()
            .enumerate()
            .map(classify_tile)
            .collect::<Result<Vec<_>>>()?,
        Concurrency::Exclusive => bounds
            .iter()
            .enumerate()
            .map(classify_tile)
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(TileGrid::assemble(rows, cols, bounds, whole, tiles))
}

pub fn headline(result: &ClassificationResult) -> String {
    format!("{} {:.2}", result.label.name(), result.confidence)
}

/// Full-resolution copy with matching tiles tinted, outlined and labelled
/// with their confidence, plus the whole-image label in the top-left.
pub fn render_localization(img: &Raster, grid: &TileGrid) -> Raster {
    let mut out = img.clone();
    let scale = overlay::auto_scale(img);
    for ((rect, tile), &hit) in grid.bounds.iter().zip(&grid.tiles).zip(&grid.match_mask) {
        if !hit {
            continue;
        }
        overlay::tint_rect(&mut out, *rect, HIGHLIGHT_COLOR, HIGHLIGHT_ALPHA);
        overlay::stroke_rect(&mut out, *rect, HIGHLIGHT_COLOR, HIGHLIGHT_BORDER);
        overlay::draw_label(
            &mut out,
            rect.x + HIGHLIGHT_BORDER + 1,
            rect.y + rect.height.saturating_sub(HIGHLIGHT_BORDER + 1 + (overlay::GLYPH_H + 2) * scale),
            &format!("{:.2}", tile.confidence),
            scale,
            [255, 255, 255],
            HIGHLIGHT_COLOR,
        );
    }
    overlay::draw_headline(&mut out, &headline(&grid.whole));
    out
}
