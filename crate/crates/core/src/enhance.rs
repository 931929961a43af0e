//! Brightness enhancement for images that fail the dark gate.
//!
//! The built-in enhancer is a global gamma curve. An external command can be
//! plugged in instead; it receives a PNG on stdin and must write a PNG of the
//! same size to stdout. Any failure there falls back to the gamma curve.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio;
use crate::luminance::{dark_report, DarkThresholds};
use crate::raster::{to_gray, Raster};

pub const DEFAULT_GAMMA: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnhanceMode {
    Auto,
    Always,
    Never,
}

impl FromStr for EnhanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(EnhanceMode::Auto),
            "on" | "always" => Ok(EnhanceMode::Always),
            "off" | "never" => Ok(EnhanceMode::Never),
            other => Err(Error::param("enhance", format!("unknown mode `{other}`"))),
        }
    }
}

/// Exponent of the brightening curve, in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Gamma(f64);

impl Gamma {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(Gamma(value))
        } else {
            Err(Error::param("gamma", format!("{value} is outside (0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Lookup table for `round(255 * (v / 255)^gamma)`.
    pub fn lut(self) -> [u8; 256] {
        let mut lut = [0u8; 256];
        for (v, out) in lut.iter_mut().enumerate() {
            let y = 255.0 * (v as f64 / 255.0).powf(self.0);
            *out = (y + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
        lut
    }
}

impl Default for Gamma {
    fn default() -> Self {
        Gamma(DEFAULT_GAMMA)
    }
}

impl TryFrom<f64> for Gamma {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Gamma::new(v)
    }
}

impl From<Gamma> for f64 {
    fn from(g: Gamma) -> f64 {
        g.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhancePolicy {
    pub mode: EnhanceMode,
    pub gamma: Gamma,
    pub thresholds: DarkThresholds,
}

impl Default for EnhancePolicy {
    fn default() -> Self {
        EnhancePolicy {
            mode: EnhanceMode::Auto,
            gamma: Gamma::default(),
            thresholds: DarkThresholds::default(),
        }
    }
}

impl EnhancePolicy {
    /// Whether `img` should be enhanced under this policy.
    pub fn should_enhance(&self, img: &Raster) -> bool {
        match self.mode {
            EnhanceMode::Never => false,
            EnhanceMode::Always => true,
            EnhanceMode::Auto => dark_report(&to_gray(img), &self.thresholds).is_dark,
        }
    }
}

/// Rejects gamma outside (0, 1].
pub fn enhance_gamma(img: &Raster, gamma: f64) -> Result<Raster> {
    let lut = Gamma::new(gamma)?.lut();
    Ok(img.map_channels(|v| lut[v as usize]))
}

/// Applies the gamma curve when the policy calls for it; `.1` reports whether it did.
pub fn maybe_enhance(img: &Raster, policy: &EnhancePolicy) -> (Raster, bool) {
    if policy.should_enhance(img) {
        let lut = policy.gamma.lut();
        (img.map_channels(|v| lut[v as usize]), true)
    } else {
        (img.clone(), false)
    }
}

/// Runs an external program through `sh -c`, PNG in on stdin, PNG out on stdout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalEnhancer {
    command: String,
}

impl ExternalEnhancer {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalEnhancer {
            command: command.into(),
        }
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn enhance(&self, img: &Raster) -> Result<Raster> {
        let png = imageio::encode_png(img)?;
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Enhancer(format!("spawning `{}`: {e}", self.command)))?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        // feed stdin from a second thread so a chatty child cannot deadlock us
        let writer = std::thread::spawn(move || stdin.write_all(&png));
        let mut out = Vec::new();
        let read = child
            .stdout
            .take()
            .expect("stdout is piped")
            .read_to_end(&mut out);
        let status = child
            .wait()
            .map_err(|e| Error::Enhancer(format!("waiting on `{}`: {e}", self.command)))?;
        // a child that exits without draining stdin produces a broken pipe; the exit status decides
        let _ = writer.join();
        read.map_err(|e| Error::Enhancer(format!("reading output: {e}")))?;
        if !status.success() {
            return Err(Error::Enhancer(format!("`{}` exited with {status}", self.command)));
        }
        let enhanced = imageio::decode_bytes(&out, std::path::Path::new("<enhancer stdout>"))
            .map_err(|e| Error::Enhancer(e.to_string()))?;
        if (enhanced.width(), enhanced.height()) != (img.width(), img.height()) {
            return Err(Error::Enhancer(format!(
                "output is {}x{}, expected {}x{}",
                enhanced.width(),
                enhanced.height(),
                img.width(),
                img.height()
            )));
        }
        Ok(enhanced)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Enhancer {
    #[default]
    Gamma,
    External(ExternalEnhancer),
}

impl FromStr for Enhancer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "gamma" {
            return Ok(Enhancer::Gamma);
        }
        match s.strip_prefix("extern-enhancer:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(Enhancer::External(ExternalEnhancer::new(cmd))),
            _ => Err(Error::param(
                "enhancer",
                format!("expected `gamma` or `extern-enhancer:CMD`, got `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Enhanced {
    pub raster: Raster,
    pub applied: bool,
    /// The external enhancer failed and the gamma curve was used instead.
    pub fell_back: bool,
}

impl Enhancer {
    pub fn apply(&self, img: &Raster, policy: &EnhancePolicy) -> Enhanced {
        match self {
            Enhancer::Gamma => {
                let (raster, applied) = maybe_enhance(img, policy);
                Enhanced {
                    raster,
                    applied,
                    fell_back: false,
                }
            }
            Enhancer::External(ext) => {
                if !policy.should_enhance(img) {
                    return Enhanced {
                        raster: img.clone(),
                        applied: false,
                        fell_back: false,
                    };
                }
                match ext.enhance(img) {
                    Ok(raster) => Enhanced {
                        raster,
                        applied: true,
                        fell_back: false,
                    },
                    Err(e) => {
                        warn!("{e}; falling back to gamma {}", policy.gamma.value());
                        let lut = policy.gamma.lut();
                        Enhanced {
                            raster: img.map_channels(|v| lut[v as usize]),
                            applied: true,
                            fell_back: true,
                        }
                    }
                }
            }
        }
    }
}
