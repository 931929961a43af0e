//! Smoking/calling behavior classification around a pluggable 4-class
//! image classifier.
//!
//! The pipeline: decode an RGB frame, gate it on darkness and optionally
//! enhance it, classify it through a [`classifier::Backend`], then either
//! localize the behavior over a tile grid or smooth labels across a frame
//! stream.

pub mod classifier;
pub mod cli;
pub mod enhance;
pub mod error;
pub mod imageio;
pub mod localize;
pub mod luminance;
pub mod netmath;
pub mod overlay;
pub mod raster;
pub mod report;
pub mod temporal;

pub use classifier::{
    Backend, BackendSpec, ClassificationResult, Classifier, Concurrency, ConstantBackend, Label,
    ProbVector, ScriptedBackend,
};
#[cfg(feature = "onnx")]
pub use classifier::ModelBackend;
pub use error::{Error, Result};
pub use raster::{GrayRaster, Raster, Rect};
