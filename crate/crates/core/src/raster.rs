//! Image data model and the deterministic pixel operations used by the rest
//! of the pipeline.
//!
//! Channel order is RGB everywhere. Anything decoded from disk is converted
//! at ingestion (see [`crate::imageio`]).

use log::warn;

use crate::error::{Error, Result};

/// Side length of the square model input.
pub const MODEL_INPUT_SIDE: u32 = 299;
/// Images below this on either side are rejected outright.
pub const MIN_INPUT_SIDE: u32 = 32;
/// Images below this on either side are accepted with a warning.
pub const RECOMMENDED_INPUT_SIDE: u32 = 150;

/// Axis-aligned pixel rectangle, half-open on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }
}

/// 8-bit RGB image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Raster")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "width and height must be positive",
        });
    }
    Ok(())
}

impl Raster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() as u64 != u64::from(width) * u64::from(height) * 3 {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "pixel buffer length must be width * height * 3",
            });
        }
        Ok(Raster {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let n = width as usize * height as usize;
        Ok(Raster {
            width,
            height,
            pixels: rgb.repeat(n),
        })
    }

    /// Builds a raster by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Ok(Raster {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.offset(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn bounds(&self) -> Rect {
        Rect {
            x: 0,
            y: 0,
            width: self.width,
            height: self.height,
        }
    }

    /// Copies out the pixels under `rect`.
    pub fn crop(&self, rect: Rect) -> Result<Raster> {
        check_dims(rect.width, rect.height)?;
        if rect.x + rect.width > self.width || rect.y + rect.height > self.height {
            return Err(Error::InvalidDimensions {
                width: rect.width,
                height: rect.height,
                reason: "crop rectangle exceeds image bounds",
            });
        }
        let row_bytes = rect.width as usize * 3;
        let mut pixels = Vec::with_capacity(row_bytes * rect.height as usize);
        for y in rect.y..rect.y + rect.height {
            let start = self.offset(rect.x, y);
            pixels.extend_from_slice(&self.pixels[start..start + row_bytes]);
        }
        Ok(Raster {
            width: rect.width,
            height: rect.height,
            pixels,
        })
    }

    /// Applies `f` to every channel value.
    pub fn map_channels(&self, f: impl Fn(u8) -> u8) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// 8-bit luma image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayRaster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayRaster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() as u64 != u64::from(width) * u64::from(height) {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "luma buffer length must be width * height",
            });
        }
        Ok(GrayRaster {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn flip_horizontal(&self) -> GrayRaster {
        let w = self.width as usize;
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks_exact(w) {
            pixels.extend(row.iter().rev());
        }
        GrayRaster {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

/// BT.601 luma of one pixel, rounded half-up.
#[inline]
pub fn luma(rgb: [u8; 3]) -> u8 {
    let [r, g, b] = rgb.map(u32::from);
    // 0.299/0.587/0.114 scaled by 1000 so the rounding is exact.
    let scaled = 299 * r + 587 * g + 114 * b;
    ((scaled + 500) / 1000).min(255) as u8
}

pub fn to_gray(img: &Raster) -> GrayRaster {
    let pixels = img
        .pixels
        .chunks_exact(3)
        .map(|p| luma([p[0], p[1], p[2]]))
        .collect();
    GrayRaster {
        width: img.width,
        height: img.height,
        pixels,
    }
}

pub fn flip_horizontal(img: &Raster) -> Raster {
    let row_bytes = img.width as usize * 3;
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for row in img.pixels.chunks_exact(row_bytes) {
        for px in row.chunks_exact(3).rev() {
            pixels.extend_from_slice(px);
        }
    }
    Raster {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Source sample positions for one axis: (lower index, upper index, weight of upper).
fn axis_taps(src: u32, dst: u32) -> Vec<(usize, usize, f64)> {
    let scale = f64::from(src) / f64::from(dst);
    let last = f64::from(src - 1);
    (0..dst)
        .map(|d| {
            // pixel centers line up at (i + 0.5)
            let s = ((f64::from(d) + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = s.floor();
            let hi = (lo + 1.0).min(last);
            (lo as usize, hi as usize, s - lo)
        })
        .collect()
}

/// Bilinear resampling with edge clamping.
pub fn resize_bilinear(img: &Raster, out_w: u32, out_h: u32) -> Result<Raster> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidDimensions {
            width: out_w,
            height: out_h,
            reason: "resize target must be at least 1x1",
        });
    }
    if out_w == img.width && out_h == img.height {
        return Ok(img.clone());
    }
    let xs = axis_taps(img.width, out_w);
    let ys = axis_taps(img.height, out_h);
    let in_w = img.width as usize;
    let src = &img.pixels;
    let mut pixels = Vec::with_capacity(out_w as usize * out_h as usize * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = (y0 * in_w + x0) * 3;
            let p01 = (y0 * in_w + x1) * 3;
            let p10 = (y1 * in_w + x0) * 3;
            let p11 = (y1 * in_w + x1) * 3;
            for c in 0..3 {
                let top = f64::from(src[p00 + c]) * (1.0 - fx) + f64::from(src[p01 + c]) * fx;
                let bottom = f64::from(src[p10 + c]) * (1.0 - fx) + f64::from(src[p11 + c]) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                pixels.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(Raster {
        width: out_w,
        height: out_h,
        pixels,
    })
}

/// Maps a 299x299 raster to the model's HWC float input, each channel
/// scaled affinely from [0, 255] onto [-1, 1].
pub fn normalize_for_model(img: &Raster) -> Result<Vec<f32>> {
    if img.width != MODEL_INPUT_SIDE || img.height != MODEL_INPUT_SIDE {
        return Err(Error::InvalidDimensions {
            width: img.width,
            height: img.height,
            reason: "model input must be exactly 299x299",
        });
    }
    Ok(img
        .pixels
        .iter()
        .map(|&v| normalize_channel(v))
        .collect())
}

#[inline]
pub(crate) fn normalize_channel(v: u8) -> f32 {
    (f64::from(v) / 127.5 - 1.0) as f32
}

/// Enforces the input size policy: hard floor at 32x32, warning below 150x150.
pub fn check_input_size(img: &Raster) -> Result<()> {
    let (w, h) = (img.width, img.height);
    if w < MIN_INPUT_SIDE || h < MIN_INPUT_SIDE {
        return Err(Error::InvalidDimensions {
            width: w,
            height: h,
            reason: "images must be at least 32x32",
        });
    }
    if w < RECOMMENDED_INPUT_SIDE || h < RECOMMENDED_INPUT_SIDE {
        warn!("{w}x{h} input is below the recommended 150x150; results may be unreliable");
    }
    Ok(())
}
