//! Per-stream smoothing of frame classifications.
//!
//! The smoothed label of a frame is the most common raw label among the last
//! `capacity` frames (default 15), ties going to the label seen most
//! recently. Its score is the mean, over the same window, of the probability
//! each frame assigned to that label.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassificationResult, Label};
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedFrameResult {
    pub frame_index: u64,
    pub raw: ClassificationResult,
    pub mode_label: Label,
    pub mode_mean: f64,
}

#[derive(Debug, Clone)]
pub struct TemporalState {
    capacity: usize,
    window: VecDeque<ClassificationResult>,
    frames_seen: u64,
}

impl TemporalState {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::param("window", "capacity must be positive"));
        }
        Ok(TemporalState {
            capacity,
            window: VecDeque::with_capacity(capacity),
            frames_seen: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    /// Oldest first.
    pub fn window(&self) -> impl ExactSizeIterator<Item = &ClassificationResult> {
        self.window.iter()
    }

    pub fn push(&mut self, result: ClassificationResult) -> SmoothedFrameResult {
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(result);
        let frame_index = self.frames_seen;
        self.frames_seen += 1;

        let mut counts = [0usize; 4];
        let mut last_seen = [0usize; 4];
        for (pos, r) in self.window.iter().enumerate() {
            counts[r.label.index()] += 1;
            last_seen[r.label.index()] = pos;
        }
        let mode_label = Label::ALL
            .into_iter()
            .filter(|l| counts[l.index()] > 0)
            .max_by_key(|l| (counts[l.index()], last_seen[l.index()]))
            .expect("window holds the frame just pushed");
        let sum: f64 = self.window.iter().map(|r| r.probs.get(mode_label)).sum();
        SmoothedFrameResult {
            frame_index,
            raw: result,
            mode_label,
            mode_mean: sum / self.window.len() as f64,
        }
    }
}

impl Default for TemporalState {
    fn default() -> Self {
        TemporalState::new(DEFAULT_WINDOW).expect("default window is positive")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub frames_processed: u64,
    pub elapsed_secs: f64,
    pub fps: f64,
    /// Share of frames per smoothed label, in canonical label order. `None`
    /// when no frames were processed.
    pub label_percentages: Option<[f64; 4]>,
}

pub fn finalize_run(history: &[SmoothedFrameResult], elapsed_secs: f64) -> Result<RunReport> {
    if !(elapsed_secs.is_finite() && elapsed_secs > 0.0) {
        return Err(Error::param("elapsed", format!("{elapsed_secs} must be positive")));
    }
    let n = history.len() as u64;
    let label_percentages = (n > 0).then(|| {
        let mut counts = [0u64; 4];
        for f in history {
            counts[f.mode_label.index()] += 1;
        }
        counts.map(|c| 100.0 * c as f64 / n as f64)
    });
    Ok(RunReport {
        frames_processed: n,
        elapsed_secs,
        fps: n as f64 / elapsed_secs,
        label_percentages,
    })
}

impl RunReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "frames processed: {}\nelapsed: {:.3} s\nfps: {:.2}\n",
            self.frames_processed, self.elapsed_secs, self.fps
        );
        for label in Label::ALL {
            let pct = self
                .label_percentages
                .map(|p| format!("{:.1}%", p[label.index()]))
                .unwrap_or_else(|| "n/a".to_owned());
            out.push_str(&format!("{:<16} {pct}\n", label.name()));
        }
        out
    }
}
