//! The 4-class classification boundary.
//!
//! A [`Backend`] maps a normalized 299x299x3 tensor to four class
//! probabilities. [`Classifier`] wraps a backend, owns the preprocessing, checks
//! every returned distribution against the contract, and counts invocations.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{check_input_size, normalize_for_model, resize_bilinear, Raster, MODEL_INPUT_SIDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Normal = 0,
    Smoking = 1,
    Calling = 2,
    SmokingCalling = 3,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Normal, Label::Smoking, Label::Calling, Label::SmokingCalling];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Smoking => "smoking",
            Label::Calling => "calling",
            Label::SmokingCalling => "smoking_calling",
        }
    }

    /// Accepts the canonical names plus `-` and space variants of `smoking_calling`.
    pub fn from_name(name: &str) -> Option<Label> {
        let norm = name.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Label::ALL.into_iter().find(|l| l.name() == norm)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Entries more negative than this are a contract violation.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;
/// Sums further than this from 1 are a contract violation.
pub const SUM_REJECT_TOLERANCE: f64 = 1e-4;
/// Sums further than this from 1 (but inside the reject band) are renormalized.
pub const SUM_EXACT_TOLERANCE: f64 = 1e-6;

/// Probability distribution over [`Label::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct ProbVector([f64; 4]);

impl ProbVector {
    pub fn new(values: [f64; 4]) -> Result<Self> {
        Self::checked(&values).map(|(p, _)| p)
    }

    /// Validates raw backend output. The flag reports whether it had to be
    /// renormalized.
    pub fn checked(values: &[f64]) -> Result<(Self, bool)> {
        let arr: [f64; 4] = values.try_into().map_err(|_| {
            Error::BackendContract(format!("expected 4 probabilities, got {}", values.len()))
        })?;
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(Error::BackendContract(format!("non-finite probability in {arr:?}")));
        }
        if arr.iter().any(|&v| v < -NEGATIVE_TOLERANCE) {
            return Err(Error::BackendContract(format!("negative probability in {arr:?}")));
        }
        let arr = arr.map(|v| v.max(0.0));
        let sum: f64 = arr.iter().sum();
        let drift = (sum - 1.0).abs();
        if drift > SUM_REJECT_TOLERANCE {
            return Err(Error::BackendContract(format!("probabilities sum to {sum}")));
        }
        if drift > SUM_EXACT_TOLERANCE {
            return Ok((ProbVector(arr.map(|v| v / sum)), true));
        }
        Ok((ProbVector(arr), false))
    }

    pub fn values(&self) -> [f64; 4] {
        self.0
    }

    pub fn get(&self, label: Label) -> f64 {
        self.0[label.index()]
    }

    /// Highest-probability label; the lowest index wins ties.
    pub fn argmax(&self) -> Label {
        let mut best = 0;
        for i in 1..4 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        Label::ALL[best]
    }
}

impl TryFrom<[f64; 4]> for ProbVector {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for [f64; 4] {
    fn from(p: ProbVector) -> [f64; 4] {
        p.0
    }
}

pub fn argmax_label(probs: &ProbVector) -> Label {
    probs.argmax()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub label: Label,
    pub confidence: f64,
    pub probs: ProbVector,
}

impl ClassificationResult {
    pub fn from_probs(probs: ProbVector) -> Self {
        let label = probs.argmax();
        ClassificationResult {
            label,
            confidence: probs.get(label),
            probs,
        }
    }
}

/// How a backend may be driven from multiple threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concurrency {
    ConcurrentSafe,
    /// Calls must be issued one at a time, in order.
    Exclusive,
}

pub trait Backend: Send + Sync {
    fn describe(&self) -> String;

    fn concurrency(&self) -> Concurrency;

    /// `input` is the HWC 299x299x3 tensor in [-1, 1]. Returns raw class
    /// probabilities in canonical label order.
    fn predict(&self, input: &[f32]) -> Result<Vec<f64>>;
}

/// Returns the same distribution for every input.
#[derive(Debug, Clone)]
pub struct ConstantBackend {
    probs: [f64; 4],
}

impl ConstantBackend {
    pub fn new(probs: [f64; 4]) -> Self {
        ConstantBackend { probs }
    }
}

impl Backend for ConstantBackend {
    fn describe(&self) -> String {
        let p = self.probs.map(|v| v.to_string());
        format!("constant:{}", p.join(","))
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::ConcurrentSafe
    }

    fn predict(&self, _input: &[f32]) -> Result<Vec<f64>> {
        Ok(self.probs.to_vec())
    }
}

/// Replays a fixed list of distributions in call order; running past the end
/// is a backend failure.
#[derive(Debug)]
pub struct ScriptedBackend {
    script: Vec<[f64; 4]>,
    cursor: Mutex<usize>,
    origin: String,
}

impl ScriptedBackend {
    pub fn new(script: Vec<[f64; 4]>) -> Self {
        ScriptedBackend {
            script,
            cursor: Mutex::new(0),
            origin: "inline".to_owned(),
        }
    }

    /// One whitespace-separated 4-tuple per line. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Vec<[f64; 4]>> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Backend(format!("script line {}: {e}", n + 1)))?;
            let row: [f64; 4] = vals.try_into().map_err(|v: Vec<f64>| {
                Error::Backend(format!("script line {}: expected 4 values, got {}", n + 1, v.len()))
            })?;
            rows.push(row);
        }
        Ok(rows)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Backend(format!("reading script {}: {e}", path.display())))?;
        Ok(ScriptedBackend {
            script: Self::parse(&text)?,
            cursor: Mutex::new(0),
            origin: path.display().to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

impl Backend for ScriptedBackend {
    fn describe(&self) -> String {
        format!("scripted:{}", self.origin)
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Exclusive
    }

    fn predict(&self, _input: &[f32]) -> Result<Vec<f64>> {
        let mut cursor = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
        let row = self.script.get(*cursor).ok_or_else(|| {
            Error::Backend(format!("script exhausted after {} calls", self.script.len()))
        })?;
        *cursor += 1;
        Ok(row.to_vec())
    }
}

#[cfg(feature = "onnx")]
pub use model::ModelBackend;

#[cfg(feature = "onnx")]
mod model {
    use std::path::Path;

    use tract_onnx::prelude::*;

    use super::{Backend, Concurrency, Label};
    use crate::error::{Error, Result};
    use crate::raster::MODEL_INPUT_SIDE;

    type Plan = std::sync::Arc<TypedRunnableModel>;

    /// ONNX model file: input 1x299x299x3 f32 in [-1, 1], output 1x4
    /// probabilities, metadata key `class_order` naming the output columns.
    pub struct ModelBackend {
        plan: Plan,
        /// `column_label[i]` is the canonical label of output column `i`.
        column_label: [Label; 4],
        origin: String,
    }

    impl std::fmt::Debug for ModelBackend {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.debug_struct("ModelBackend")
                .field("origin", &self.origin)
                .field("class_order", &self.column_label)
                .finish_non_exhaustive()
        }
    }

    fn backend_err(path: &Path, e: impl std::fmt::Display) -> Error {
        Error::Backend(format!("loading model {}: {e}", path.display()))
    }

    /// Parses `a,b,c,d` or a JSON array of names into a label permutation.
    pub(crate) fn parse_class_order(raw: &str) -> Result<[Label; 4]> {
        let names: Vec<String> = if raw.trim_start().starts_with('[') {
            serde_json::from_str(raw)
                .map_err(|e| Error::Backend(format!("class_order is not a JSON string array: {e}")))?
        } else {
            raw.split([',', ' ', '\n', '\t'])
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .collect()
        };
        let labels = names
            .iter()
            .map(|n| Label::from_name(n).ok_or_else(|| Error::Backend(format!("unknown class `{n}` in class_order"))))
            .collect::<Result<Vec<_>>>()?;
        let order: [Label; 4] = labels
            .try_into()
            .map_err(|v: Vec<Label>| Error::Backend(format!("class_order lists {} classes, need 4", v.len())))?;
        for l in Label::ALL {
            if !order.contains(&l) {
                return Err(Error::Backend(format!("class_order is missing `{l}`")));
            }
        }
        Ok(order)
    }

    impl ModelBackend {
        pub fn load(path: &Path) -> Result<Self> {
            let onnx = tract_onnx::onnx();
            let proto = onnx.proto_model_for_path(path).map_err(|e| backend_err(path, e))?;
            let raw_order = proto
                .metadata_props
                .iter()
                .find(|p| p.key == "class_order")
                .map(|p| p.value.clone())
                .ok_or_else(|| backend_err(path, "missing `class_order` metadata"))?;
            let column_label = parse_class_order(&raw_order)?;
            let side = MODEL_INPUT_SIDE as usize;
            let plan = onnx
                .model_for_proto_model(&proto)
                .and_then(|m| m.with_input_fact(0, f32::fact([1, side, side, 3]).into()))
                .and_then(|m| m.into_optimized())
                .and_then(|m| m.into_runnable())
                .map_err(|e| backend_err(path, e))?;
            Ok(ModelBackend {
                plan,
                column_label,
                origin: path.display().to_string(),
            })
        }

        pub fn class_order(&self) -> [Label; 4] {
            self.column_label
        }
    }

    impl Backend for ModelBackend {
        fn describe(&self) -> String {
            format!("model:{}", self.origin)
        }

        fn concurrency(&self) -> Concurrency {
            Concurrency::ConcurrentSafe
        }

        fn predict(&self, input: &[f32]) -> Result<Vec<f64>> {
            let side = MODEL_INPUT_SIDE as usize;
            let tensor = Tensor::from_shape(&[1, side, side, 3], input)
                .map_err(|e| Error::Backend(format!("building input tensor: {e}")))?;
            let outputs = self
                .plan
                .run(tvec!(tensor.into()))
                .map_err(|e| Error::Backend(format!("running model: {e}")))?;
            let out = outputs
                .first()
                .ok_or_else(|| Error::Backend("model produced no outputs".to_owned()))?;
            let view = out
                .to_plain_array_view::<f32>()
                .map_err(|e| Error::Backend(format!("reading model output: {e}")))?;
            let raw: Vec<f32> = view.iter().copied().collect();
            if raw.len() != 4 {
                return Err(Error::BackendContract(format!(
                    "model output has {} values, expected 4",
                    raw.len()
                )));
            }
            let mut canonical = vec![0.0; 4];
            for (col, label) in self.column_label.iter().enumerate() {
                canonical[label.index()] = f64::from(raw[col]);
            }
            Ok(canonical)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Constant([f64; 4]),
    Scripted(PathBuf),
    Model(PathBuf),
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::param("backend", format!("`{s}` is not KIND:ARG")))?;
        match kind {
            "constant" => {
                let vals: Vec<f64> = arg
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::param("backend", format!("constant: {e}")))?;
                let probs: [f64; 4] = vals
                    .try_into()
                    .map_err(|_| Error::param("backend", "constant needs exactly 4 values"))?;
                Ok(BackendSpec::Constant(probs))
            }
            "scripted" if !arg.is_empty() => Ok(BackendSpec::Scripted(PathBuf::from(arg))),
            "model" if !arg.is_empty() => Ok(BackendSpec::Model(PathBuf::from(arg))),
            _ => Err(Error::param(
                "backend",
                format!("expected constant:P0,P1,P2,P3 | scripted:FILE | model:FILE.onnx, got `{s}`"),
            )),
        }
    }
}

impl BackendSpec {
    pub fn build(&self) -> Result<Box<dyn Backend>> {
        match self {
            BackendSpec::Constant(p) => Ok(Box::new(ConstantBackend::new(*p))),
            BackendSpec::Scripted(path) => Ok(Box::new(ScriptedBackend::from_file(path)?)),
            #[cfg(feature = "onnx")]
            BackendSpec::Model(path) => Ok(Box::new(ModelBackend::load(path)?)),
            #[cfg(not(feature = "onnx"))]
            BackendSpec::Model(path) => Err(Error::Backend(format!(
                "cannot load {}: built without ONNX support",
                path.display()
            ))),
        }
    }
}

/// A backend plus preprocessing, contract checks and an invocation counter.
pub struct Classifier {
    backend: Box<dyn Backend>,
    invocations: AtomicU64,
}

impl fmt::Debug for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Classifier")
            .field("backend", &self.backend.describe())
            .field("invocations", &self.invocations())
            .finish()
    }
}

impl Classifier {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Self::from_boxed(Box::new(backend))
    }

    pub fn from_boxed(backend: Box<dyn Backend>) -> Self {
        Classifier {
            backend,
            invocations: AtomicU64::new(0),
        }
    }

    pub fn from_spec(spec: &BackendSpec) -> Result<Self> {
        spec.build().map(Self::from_boxed)
    }

    pub fn describe(&self) -> String {
        self.backend.describe()
    }

    pub fn concurrency(&self) -> Concurrency {
        self.backend.concurrency()
    }

    /// Number of backend calls made so far.
    pub fn invocations(&self) -> u64 {
        self.invocations.load(Ordering::SeqCst)
    }

    /// Resizes to 299x299, normalizes, runs the backend and validates its output.
    pub fn classify(&self, img: &Raster) -> Result<ClassificationResult> {
        check_input_size(img)?;
        let model_input = resize_bilinear(img, MODEL_INPUT_SIDE, MODEL_INPUT_SIDE)?;
        let tensor = normalize_for_model(&model_input)?;
        self.invocations.fetch_add(1, Ordering::SeqCst);
        let raw = self.backend.predict(&tensor)?;
        let (probs, renormalized) = ProbVector::checked(&raw)?;
        if renormalized {
            warn!("{}: renormalized a distribution summing to {}", self.describe(), raw.iter().sum::<f64>());
        }
        Ok(ClassificationResult::from_probs(probs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img() -> Raster {
        Raster::filled(64, 48, [90, 120, 30]).unwrap()
    }

    #[test]
    fn labels_round_trip() {
        for (i, l) in Label::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(Label::from_index(i), Some(*l));
            assert_eq!(Label::from_name(l.name()), Some(*l));
        }
        assert_eq!(Label::from_name("Smoking-Calling"), Some(Label::SmokingCalling));
        assert_eq!(Label::from_name("vaping"), None);
        assert_eq!(serde_json::to_string(&Label::SmokingCalling).unwrap(), "\"smoking_calling\"");
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(ProbVector::new([0.25; 4]).unwrap().argmax(), Label::Normal);
        assert_eq!(ProbVector::new([0.0, 0.0, 1.0, 0.0]).unwrap().argmax(), Label::Calling);
        assert_eq!(argmax_label(&ProbVector::new([0.2, 0.5, 0.2, 0.1]).unwrap()), Label::Smoking);
        assert_eq!(ProbVector::new([0.1, 0.4, 0.1, 0.4]).unwrap().argmax(), Label::Smoking);
    }

    #[test]
    fn tolerance_band() {
        let (_, renorm) = ProbVector::checked(&[0.25, 0.25, 0.25, 0.25 + 5e-7]).unwrap();
        assert!(!renorm);
        let (p, renorm) = ProbVector::checked(&[0.25, 0.25, 0.25, 0.25 + 5e-5]).unwrap();
        assert!(renorm);
        assert!((p.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(
            ProbVector::checked(&[0.25, 0.25, 0.25, 0.26]),
            Err(Error::BackendContract(_))
        ));
        assert!(ProbVector::checked(&[-1e-6, 0.5, 0.5, 1e-6]).is_err());
        let (p, _) = ProbVector::checked(&[-1e-10, 0.5, 0.5, 1e-10]).unwrap();
        assert_eq!(p.values()[0], 0.0);
        assert!(ProbVector::checked(&[0.5, 0.5]).is_err());
        assert!(ProbVector::checked(&[f64::NAN, 0.5, 0.5, 0.0]).is_err());
    }

    #[test]
    fn constant_backend() {
        let c = Classifier::new(ConstantBackend::new([0.1, 0.2, 0.3, 0.4]));
        let r = c.classify(&img()).unwrap();
        assert_eq!(r.label, Label::SmokingCalling);
        assert_eq!(r.confidence, 0.4);
        assert_eq!(c.classify(&img()).unwrap(), r);
        assert_eq!(c.invocations(), 2);
    }

    #[test]
    fn scripted_backend_order_and_exhaustion() {
        let c = Classifier::new(ScriptedBackend::new(vec![
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]));
        assert_eq!(c.classify(&img()).unwrap().label, Label::Normal);
        assert_eq!(c.classify(&img()).unwrap().label, Label::Calling);
        let err = c.classify(&img()).unwrap_err();
        assert!(matches!(err, Error::Backend(_)));
        assert_eq!(err.exit_code(), 3);
        assert_eq!(c.concurrency(), Concurrency::Exclusive);
    }

    #[test]
    fn invalid_distribution_is_a_contract_error() {
        let c = Classifier::new(ConstantBackend::new([0.5, 0.5, 0.5, 0.5]));
        let err = c.classify(&img()).unwrap_err();
        assert!(matches!(err, Error::BackendContract(_)));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn small_input_is_an_input_error() {
        let c = Classifier::new(ConstantBackend::new([0.25; 4]));
        let err = c.classify(&Raster::filled(20, 20, [0; 3]).unwrap()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert_eq!(c.invocations(), 0);
    }

    #[test]
    fn script_parsing() {
        let rows = ScriptedBackend::parse("# header\n0.1 0.2 0.3 0.4\n\n  1 0 0 0  \n").unwrap();
        assert_eq!(rows, vec![[0.1, 0.2, 0.3, 0.4], [1.0, 0.0, 0.0, 0.0]]);
        assert!(ScriptedBackend::parse("0.1 0.2 0.3").is_err());
        assert!(ScriptedBackend::parse("a b c d").is_err());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "constant:0.1,0.2,0.3,0.4".parse::<BackendSpec>().unwrap(),
            BackendSpec::Constant([0.1, 0.2, 0.3, 0.4])
        );
        assert_eq!(
            "scripted:run.txt".parse::<BackendSpec>().unwrap(),
            BackendSpec::Scripted("run.txt".into())
        );
        assert_eq!(
            "model:m.onnx".parse::<BackendSpec>().unwrap(),
            BackendSpec::Model("m.onnx".into())
        );
        assert!("constant:0.1,0.2".parse::<BackendSpec>().is_err());
        assert!("model:".parse::<BackendSpec>().is_err());
        assert!("torch:x".parse::<BackendSpec>().is_err());
        assert!("nonsense".parse::<BackendSpec>().is_err());
    }

    #[cfg(feature = "onnx")]
    #[test]
    fn class_order_parsing() {
        use super::model::parse_class_order;
        assert_eq!(parse_class_order("normal,smoking,calling,smoking_calling").unwrap(), Label::ALL);
        assert_eq!(
            parse_class_order(r#"["calling","normal","smoking_calling","smoking"]"#).unwrap(),
            [Label::Calling, Label::Normal, Label::SmokingCalling, Label::Smoking]
        );
        assert!(parse_class_order("normal,smoking,calling").is_err());
        assert!(parse_class_order("normal,normal,calling,smoking").is_err());
        assert!(parse_class_order("normal,smoking,calling,vaping").is_err());
    }
}
