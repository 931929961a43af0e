//! JSON report documents written by the CLI. Every document carries a `kind`
//! tag; the schemas live in `schemas/` at the crate root.

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassificationResult, Label};
use crate::enhance::{EnhanceMode, Enhanced};
use crate::luminance::{ClassDarkStats, SkippedFile};
use crate::raster::Rect;
use crate::temporal::RunReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDoc {
    pub label: Label,
    pub label_index: usize,
    pub confidence: f64,
    pub probs: [f64; 4],
}

impl From<&ClassificationResult> for ResultDoc {
    fn from(r: &ClassificationResult) -> Self {
        ResultDoc {
            label: r.label,
            label_index: r.label.index(),
            confidence: r.confidence,
            probs: r.probs.values(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancementDoc {
    pub mode: EnhanceMode,
    pub gamma: f64,
    pub enhancer: String,
    pub pixel_threshold: u8,
    pub ratio_threshold: f64,
    /// Dark-pixel ratio of the input before enhancement.
    pub dark_ratio: f64,
    pub enhancement_applied: bool,
    pub fell_back: bool,
}

impl EnhancementDoc {
    pub fn new(
        mode: EnhanceMode,
        gamma: f64,
        enhancer: String,
        thresholds: (u8, f64),
        dark_ratio: f64,
        outcome: &Enhanced,
    ) -> Self {
        EnhancementDoc {
            mode,
            gamma,
            enhancer,
            pixel_threshold: thresholds.0,
            ratio_threshold: thresholds.1,
            dark_ratio,
            enhancement_applied: outcome.applied,
            fell_back: outcome.fell_back,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Report {
    Classify(ClassifyReport),
    Localize(LocalizeReport),
    Video(VideoReport),
    Stats(StatsReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub input: String,
    pub width: u32,
    pub height: u32,
    pub backend: String,
    pub enhancement: EnhancementDoc,
    pub result: ResultDoc,
    pub backend_invocations: u64,
    pub elapsed_secs: f64,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileDoc {
    pub index: usize,
    pub row: u32,
    pub col: u32,
    pub rect: Rect,
    pub result: ResultDoc,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizeReport {
    pub input: String,
    pub width: u32,
    pub height: u32,
    pub backend: String,
    pub enhancement: EnhancementDoc,
    pub rows: u32,
    pub cols: u32,
    pub whole: ResultDoc,
    pub tiles: Vec<TileDoc>,
    pub mask: Vec<bool>,
    pub match_count: usize,
    pub invocation_count: u64,
    pub elapsed_secs: f64,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDoc {
    pub frame_index: u64,
    pub raw: ResultDoc,
    pub mode_label: Label,
    pub mode_mean: f64,
    pub enhancement_applied: bool,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub source: String,
    pub backend: String,
    pub window: usize,
    pub frames: Vec<FrameDoc>,
    /// The raw stream ended inside a frame; the partial frame was dropped.
    pub truncated: bool,
    pub run: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub root: String,
    pub pixel_threshold: u8,
    pub ratio_threshold: f64,
    pub classes: Vec<ClassDarkStats>,
    pub skipped: Vec<SkippedFile>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only finite numbers and strings")
    }
}
