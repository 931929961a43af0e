//! C ABI over `vigil-core`.
//!
//! Every function returns a [`VigilStatus`]; on failure the message is kept
//! per thread and read with [`vigil_last_error`]. Images are tightly packed
//! RGB24, row-major, `width * height * 3` bytes. Handles are opaque and must
//! be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vigil_core::classifier::{BackendSpec, ClassificationResult, Classifier, ProbVector};
use vigil_core::enhance::enhance_gamma;
use vigil_core::localize::localize;
use vigil_core::luminance::{dark_report, DarkThresholds};
use vigil_core::netmath::{cosine_decay_lr, ScheduleParams};
use vigil_core::raster::{to_gray, Raster};
use vigil_core::temporal::TemporalState;
use vigil_core::{Error, Label};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VigilStatus {
    Ok = 0,
    Io = 1,
    InvalidInput = 2,
    Backend = 3,
    TileTooSmall = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Canonical label indices.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VigilLabel {
    Normal = 0,
    Smoking = 1,
    Calling = 2,
    SmokingCalling = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VigilResult {
    /// A `VigilLabel` value.
    pub label: u32,
    pub confidence: f64,
    /// Probabilities in canonical label order.
    pub probs: [f64; 4],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VigilDarkReport {
    pub dark_pixel_count: u64,
    pub total_pixels: u64,
    pub ratio: f64,
    pub is_dark: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VigilSmoothed {
    pub frame_index: u64,
    pub raw: VigilResult,
    pub mode_label: u32,
    pub mode_mean: f64,
}

/// Opaque classifier handle.
pub struct VigilClassifier {
    inner: Classifier,
}

/// Opaque temporal smoothing state for one stream.
pub struct VigilTemporal {
    inner: TemporalState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> VigilStatus {
    match err.exit_code() {
        1 => VigilStatus::Io,
        3 => VigilStatus::Backend,
        4 => VigilStatus::TileTooSmall,
        _ => VigilStatus::InvalidInput,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VigilStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VigilStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            VigilStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            VigilStatus::InvalidInput
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_owned());
            set_error(format!("internal panic: {msg}"));
            VigilStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: the caller promises a valid pointer or null
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

fn non_null_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller promises a valid pointer or null
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

fn rgb_len(width: u32, height: u32) -> Result<usize, Failure> {
    (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Failure::Invalid(format!("{width}x{height} image is too large")))
}

/// Copies a caller buffer into a raster.
fn raster_from(rgb: *const u8, width: u32, height: u32) -> Result<Raster, Failure> {
    if rgb.is_null() {
        return Err(Failure::Null("rgb"));
    }
    let len = rgb_len(width, height)?;
    // SAFETY: the caller guarantees `width * height * 3` readable bytes
    let bytes = unsafe { std::slice::from_raw_parts(rgb, len) };
    Ok(Raster::new(width, height, bytes.to_vec())?)
}

fn to_c(r: &ClassificationResult) -> VigilResult {
    VigilResult {
        label: r.label.index() as u32,
        confidence: r.confidence,
        probs: r.probs.values(),
    }
}

/// Builds a classifier from a backend spec: `constant:P0,P1,P2,P3`,
/// `scripted:FILE` or `model:FILE.onnx`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vigil_classifier_new(spec: *const c_char, out: *mut *mut VigilClassifier) -> VigilStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = ptr::null_mut();
        if spec.is_null() {
            return Err(Failure::Null("spec"));
        }
        // SAFETY: checked non-null above; NUL termination is the caller's contract
        let spec = unsafe { CStr::from_ptr(spec) }
            .to_str()
            .map_err(|_| Failure::Invalid("spec is not UTF-8".to_owned()))?;
        let spec: BackendSpec = spec.parse()?;
        let inner = Classifier::from_spec(&spec)?;
        *out = Box::into_raw(Box::new(VigilClassifier { inner }));
        Ok(())
    })
}

/// # Safety
/// `classifier` must come from `vigil_classifier_new` and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn vigil_classifier_free(classifier: *mut VigilClassifier) {
    if !classifier.is_null() {
        // SAFETY: ownership returns from the caller
        drop(unsafe { Box::from_raw(classifier) });
    }
}

/// Backend calls made through this handle so far; 0 for null.
///
/// # Safety
/// `classifier` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vigil_classifier_invocations(classifier: *const VigilClassifier) -> u64 {
    // SAFETY: null or live, per contract
    unsafe { classifier.as_ref() }.map_or(0, |c| c.inner.invocations())
}

/// # Safety
/// `rgb` must hold `width * height * 3` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vigil_classify_rgb(
    classifier: *const VigilClassifier,
    rgb: *const u8,
    width: u32,
    height: u32,
    out: *mut VigilResult,
) -> VigilStatus {
    guard(|| {
        let c = non_null(classifier, "classifier")?;
        let out = non_null_mut(out, "out")?;
        let img = raster_from(rgb, width, height)?;
        *out = to_c(&c.inner.classify(&img)?);
        Ok(())
    })
}

/// Classifies the whole image and each tile of a `rows x cols` grid.
/// `tiles` receives `rows * cols` results row-major and `mask[i]` is 1 when
/// tile `i` agrees with the whole-image label.
///
/// # Safety
/// `tiles` and `mask` must each hold at least `capacity` elements.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn vigil_localize_rgb(
    classifier: *const VigilClassifier,
    rgb: *const u8,
    width: u32,
    height: u32,
    rows: u32,
    cols: u32,
    whole: *mut VigilResult,
    tiles: *mut VigilResult,
    mask: *mut u8,
    capacity: usize,
) -> VigilStatus {
    guard(|| {
        let c = non_null(classifier, "classifier")?;
        let whole = non_null_mut(whole, "whole")?;
        if tiles.is_null() {
            return Err(Failure::Null("tiles"));
        }
        if mask.is_null() {
            return Err(Failure::Null("mask"));
        }
        let n = rows as usize * cols as usize;
        if capacity < n {
            return Err(Failure::Invalid(format!("{rows}x{cols} grid needs {n} slots, got {capacity}")));
        }
        let img = raster_from(rgb, width, height)?;
        let grid = localize(&c.inner, &img, rows, cols)?;
        // SAFETY: both buffers hold at least `capacity >= n` elements
        let (tiles, mask) = unsafe {
            (
                std::slice::from_raw_parts_mut(tiles, n),
                std::slice::from_raw_parts_mut(mask, n),
            )
        };
        *whole = to_c(&grid.whole);
        for i in 0..n {
            tiles[i] = to_c(&grid.tiles[i]);
            mask[i] = u8::from(grid.match_mask[i]);
        }
        Ok(())
    })
}

/// # Safety
/// `rgb` must hold `width * height * 3` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vigil_dark_report_rgb(
    rgb: *const u8,
    width: u32,
    height: u32,
    pixel_threshold: u8,
    ratio_threshold: f64,
    out: *mut VigilDarkReport,
) -> VigilStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let thresholds = DarkThresholds::new(pixel_threshold, ratio_threshold)?;
        let img = raster_from(rgb, width, height)?;
        let r = dark_report(&to_gray(&img), &thresholds);
        *out = VigilDarkReport {
            dark_pixel_count: r.dark_pixel_count,
            total_pixels: r.total_pixels,
            ratio: r.ratio,
            is_dark: r.is_dark,
        };
        Ok(())
    })
}

/// Applies the gamma curve to every channel. `out_rgb` may alias `rgb`.
///
/// # Safety
/// Both buffers must hold `width * height * 3` bytes.
#[no_mangle]
pub unsafe extern "C" fn vigil_enhance_gamma_rgb(
    rgb: *const u8,
    width: u32,
    height: u32,
    gamma: f64,
    out_rgb: *mut u8,
) -> VigilStatus {
    guard(|| {
        if out_rgb.is_null() {
            return Err(Failure::Null("out_rgb"));
        }
        let img = raster_from(rgb, width, height)?;
        let enhanced = enhance_gamma(&img, gamma)?;
        let px = enhanced.pixels();
        // SAFETY: caller guarantees the output size; the input was already copied
        unsafe { ptr::copy_nonoverlapping(px.as_ptr(), out_rgb, px.len()) };
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vigil_temporal_new(window: usize, out: *mut *mut VigilTemporal) -> VigilStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = ptr::null_mut();
        let inner = TemporalState::new(window)?;
        *out = Box::into_raw(Box::new(VigilTemporal { inner }));
        Ok(())
    })
}

/// Feeds one raw result; only `raw->probs` is read, the label is recomputed.
///
/// # Safety
/// `state` must be a live handle, `raw` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vigil_temporal_push(
    state: *mut VigilTemporal,
    raw: *const VigilResult,
    out: *mut VigilSmoothed,
) -> VigilStatus {
    guard(|| {
        let state = non_null_mut(state, "state")?;
        let raw = non_null(raw, "raw")?;
        let out = non_null_mut(out, "out")?;
        let (probs, _) = ProbVector::checked(&raw.probs)?;
        let s = state.inner.push(ClassificationResult::from_probs(probs));
        *out = VigilSmoothed {
            frame_index: s.frame_index,
            raw: to_c(&s.raw),
            mode_label: s.mode_label.index() as u32,
            mode_mean: s.mode_mean,
        };
        Ok(())
    })
}

/// # Safety
/// `state` must come from `vigil_temporal_new` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn vigil_temporal_free(state: *mut VigilTemporal) {
    if !state.is_null() {
        // SAFETY: ownership returns from the caller
        drop(unsafe { Box::from_raw(state) });
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vigil_cosine_decay_lr(
    initial_lr: f64,
    decay_steps: u64,
    alpha: f64,
    step: u64,
    out: *mut f64,
) -> VigilStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let params = ScheduleParams::new(initial_lr, decay_steps, alpha)?;
        *out = cosine_decay_lr(&params, step);
        Ok(())
    })
}

/// Static name of a label index, or null when out of range.
#[no_mangle]
pub extern "C" fn vigil_label_name(label: u32) -> *const c_char {
    match Label::from_index(label as usize) {
        Some(Label::Normal) => c"normal".as_ptr(),
        Some(Label::Smoking) => c"smoking".as_ptr(),
        Some(Label::Calling) => c"calling".as_ptr(),
        Some(Label::SmokingCalling) => c"smoking_calling".as_ptr(),
        None => ptr::null(),
    }
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn vigil_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
