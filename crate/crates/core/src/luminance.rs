//! Dark-image detection and per-class dark statistics over a dataset tree.
//!
//! A pixel is dark when its luma is strictly below the pixel threshold
//! (default 50); an image is dark when the fraction of dark pixels is
//! strictly greater than the ratio threshold (default 0.3).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio;
use crate::raster::{to_gray, GrayRaster};

pub const DEFAULT_PIXEL_THRESHOLD: u8 = 50;
pub const DEFAULT_RATIO_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkThresholds {
    pixel: u8,
    ratio: f64,
}

impl Default for DarkThresholds {
    fn default() -> Self {
        DarkThresholds {
            pixel: DEFAULT_PIXEL_THRESHOLD,
            ratio: DEFAULT_RATIO_THRESHOLD,
        }
    }
}

impl DarkThresholds {
    pub fn new(pixel: u8, ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::param("ratio_threshold", format!("{ratio} is outside [0, 1]")));
        }
        Ok(DarkThresholds { pixel, ratio })
    }

    pub fn pixel(&self) -> u8 {
        self.pixel
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkReport {
    pub dark_pixel_count: u64,
    pub total_pixels: u64,
    pub ratio: f64,
    pub is_dark: bool,
}

pub fn dark_report(img: &GrayRaster, thresholds: &DarkThresholds) -> DarkReport {
    let dark_pixel_count = img
        .pixels()
        .iter()
        .filter(|&&v| v < thresholds.pixel)
        .count() as u64;
    let total_pixels = img.pixels().len() as u64;
    let ratio = dark_pixel_count as f64 / total_pixels as f64;
    DarkReport {
        dark_pixel_count,
        total_pixels,
        ratio,
        is_dark: ratio > thresholds.ratio,
    }
}

/// `100 * dark / total` in tenths of a percent, rounded half-up.
///
/// Integer arithmetic keeps the rounding exact for every count pair.
pub fn percent_tenths(dark: u64, total: u64) -> Option<u64> {
    if total == 0 {
        return None;
    }
    Some((2000 * dark + total) / (2 * total))
}

/// Percentage rounded half-up to one decimal.
pub fn dark_percentage(dark: u64, total: u64) -> Option<f64> {
    percent_tenths(dark, total).map(|t| t as f64 / 10.0)
}

/// One-decimal rendering, `n/a` when the class is empty.
pub fn format_percentage(dark: u64, total: u64) -> String {
    match percent_tenths(dark, total) {
        Some(t) => format!("{}.{}%", t / 10, t % 10),
        None => "n/a".to_owned(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDarkStats {
    pub class_name: String,
    pub image_count: u64,
    pub dark_count: u64,
    /// `None` for an empty class.
    pub dark_percentage: Option<f64>,
}

impl ClassDarkStats {
    pub fn from_counts(class_name: impl Into<String>, image_count: u64, dark_count: u64) -> Self {
        ClassDarkStats {
            class_name: class_name.into(),
            image_count,
            dark_count,
            dark_percentage: dark_percentage(dark_count, image_count),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDarkStats {
    pub pixel_threshold: u8,
    pub ratio_threshold: f64,
    pub classes: Vec<ClassDarkStats>,
    pub skipped: Vec<SkippedFile>,
}

impl DatasetDarkStats {
    /// Table-1-shaped text: one row per class.
    pub fn render_table(&self) -> String {
        let name_w = self
            .classes
            .iter()
            .map(|c| c.class_name.len())
            .max()
            .unwrap_or(0)
            .max("class".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>8}  {:>8}  {:>8}",
            "class", "images", "dark", "dark %"
        );
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{:<name_w$}  {:>8}  {:>8}  {:>8}",
                c.class_name,
                c.image_count,
                c.dark_count,
                format_percentage(c.dark_count, c.image_count)
            );
        }
        if !self.skipped.is_empty() {
            let _ = writeln!(out, "skipped {} unreadable file(s)", self.skipped.len());
        }
        out
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    entries.sort();
    Ok(entries)
}

/// Walks `<root>/<class>/*.{png,jpg,jpeg}` and counts dark images per class.
///
/// Files that fail to decode are collected in `skipped`. Classes come out in
/// lexicographic order of their directory names.
pub fn dark_stats(root: &Path, thresholds: &DarkThresholds) -> Result<DatasetDarkStats> {
    if !root.is_dir() {
        return Err(Error::NoInput(format!(
            "dataset root {} is not a directory",
            root.display()
        )));
    }
    let mut classes = Vec::new();
    let mut skipped = Vec::new();
    for class_dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let class_name = class_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let files: Vec<PathBuf> = sorted_entries(&class_dir)?
            .into_iter()
            .filter(|p| p.is_file() && imageio::is_image_path(p))
            .collect();

        let outcomes: Vec<(PathBuf, Result<bool>)> = files
            .into_par_iter()
            .map(|path| {
                let verdict = imageio::load_image(&path)
                    .map(|img| dark_report(&to_gray(&img), thresholds).is_dark);
                (path, verdict)
            })
            .collect();

        let (mut images, mut dark) = (0u64, 0u64);
        for (path, verdict) in outcomes {
            match verdict {
                Ok(is_dark) => {
                    images += 1;
                    dark += u64::from(is_dark);
                }
                Err(e) => skipped.push(SkippedFile {
                    path,
                    reason: e.to_string(),
                }),
            }
        }
        classes.push(ClassDarkStats::from_counts(class_name, images, dark));
    }
    Ok(DatasetDarkStats {
        pixel_threshold: thresholds.pixel,
        ratio_threshold: thresholds.ratio,
        classes,
        skipped,
    })
}
