use std::ffi::{CStr, CString};
use std::ptr;

use vigil_ffi::*;

fn last_error() -> String {
    let p = vigil_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn classifier(spec: &str) -> *mut VigilClassifier {
    let spec = CString::new(spec).unwrap();
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { vigil_classifier_new(spec.as_ptr(), &mut c) }, VigilStatus::Ok);
    c
}

#[test]
fn classify_and_count() {
    let c = classifier("constant:0.1,0.6,0.2,0.1");
    let rgb = vec![90u8; 64 * 48 * 3];
    let mut out = VigilResult::default();
    assert_eq!(unsafe { vigil_classify_rgb(c, rgb.as_ptr(), 64, 48, &mut out) }, VigilStatus::Ok);
    assert_eq!(out.label, VigilLabel::Smoking as u32);
    assert_eq!(out.confidence, 0.6);
    assert_eq!(out.probs, [0.1, 0.6, 0.2, 0.1]);
    assert_eq!(unsafe { vigil_classifier_invocations(c) }, 1);
    unsafe { vigil_classifier_free(c) };
}

#[test]
fn status_codes() {
    let mut c = ptr::null_mut();
    let bad = CString::new("bogus").unwrap();
    assert_eq!(unsafe { vigil_classifier_new(bad.as_ptr(), &mut c) }, VigilStatus::InvalidInput);
    assert!(c.is_null());
    assert!(last_error().contains("backend"));

    let absent = CString::new("model:/nonexistent/model.onnx").unwrap();
    assert_eq!(unsafe { vigil_classifier_new(absent.as_ptr(), &mut c) }, VigilStatus::Backend);
    assert_eq!(unsafe { vigil_classifier_new(ptr::null(), &mut c) }, VigilStatus::NullPointer);

    let c = classifier("constant:0.25,0.25,0.25,0.25");
    let small = vec![0u8; 20 * 20 * 3];
    let mut out = VigilResult::default();
    assert_eq!(
        unsafe { vigil_classify_rgb(c, small.as_ptr(), 20, 20, &mut out) },
        VigilStatus::InvalidInput
    );
    assert_eq!(
        unsafe { vigil_classify_rgb(c, ptr::null(), 20, 20, &mut out) },
        VigilStatus::NullPointer
    );
    assert_eq!(
        unsafe { vigil_classify_rgb(ptr::null(), small.as_ptr(), 20, 20, &mut out) },
        VigilStatus::NullPointer
    );

    let img = vec![0u8; 100 * 100 * 3];
    let mut whole = VigilResult::default();
    let mut tiles = [VigilResult::default(); 16];
    let mut mask = [0u8; 16];
    let status = unsafe {
        vigil_localize_rgb(c, img.as_ptr(), 100, 100, 4, 4, &mut whole, tiles.as_mut_ptr(), mask.as_mut_ptr(), 16)
    };
    assert_eq!(status, VigilStatus::TileTooSmall);
    assert_eq!(unsafe { vigil_classifier_invocations(c) }, 0);
    unsafe { vigil_classifier_free(c) };

    let c = classifier("constant:0.5,0.5,0.5,0.5");
    let img = vec![0u8; 64 * 64 * 3];
    assert_eq!(unsafe { vigil_classify_rgb(c, img.as_ptr(), 64, 64, &mut out) }, VigilStatus::Backend);
    unsafe { vigil_classifier_free(c) };
}

#[test]
fn localize_fills_tiles_and_mask() {
    let c = classifier("constant:0.7,0.1,0.1,0.1");
    let img = vec![128u8; 200 * 160 * 3];
    let mut whole = VigilResult::default();
    let mut tiles = [VigilResult::default(); 16];
    let mut mask = [0u8; 16];
    let short = unsafe {
        vigil_localize_rgb(c, img.as_ptr(), 200, 160, 4, 4, &mut whole, tiles.as_mut_ptr(), mask.as_mut_ptr(), 15)
    };
    assert_eq!(short, VigilStatus::InvalidInput);
    let ok = unsafe {
        vigil_localize_rgb(c, img.as_ptr(), 200, 160, 4, 4, &mut whole, tiles.as_mut_ptr(), mask.as_mut_ptr(), 16)
    };
    assert_eq!(ok, VigilStatus::Ok);
    assert_eq!(whole.label, VigilLabel::Normal as u32);
    assert!(mask.iter().all(|&m| m == 1));
    assert!(tiles.iter().all(|t| t.label == 0));
    assert_eq!(unsafe { vigil_classifier_invocations(c) }, 17);
    unsafe { vigil_classifier_free(c) };
}

#[test]
fn dark_report_and_gamma() {
    let dark = [10u8; 8 * 8 * 3];
    let mut report = VigilDarkReport::default();
    assert_eq!(
        unsafe { vigil_dark_report_rgb(dark.as_ptr(), 8, 8, 50, 0.3, &mut report) },
        VigilStatus::Ok
    );
    assert_eq!((report.dark_pixel_count, report.total_pixels, report.is_dark), (64, 64, true));

    // gamma 0.5 maps 10 to 50, the first level outside the gate
    let mut lifted = vec![0u8; dark.len()];
    assert_eq!(
        unsafe { vigil_enhance_gamma_rgb(dark.as_ptr(), 8, 8, 0.5, lifted.as_mut_ptr()) },
        VigilStatus::Ok
    );
    assert!(lifted.iter().all(|&v| v == 50));
    assert_eq!(
        unsafe { vigil_dark_report_rgb(lifted.as_ptr(), 8, 8, 50, 0.3, &mut report) },
        VigilStatus::Ok
    );
    assert_eq!(report.dark_pixel_count, 0);

    assert_eq!(
        unsafe { vigil_enhance_gamma_rgb(dark.as_ptr(), 8, 8, 0.0, lifted.as_mut_ptr()) },
        VigilStatus::InvalidInput
    );
    assert_eq!(
        unsafe { vigil_dark_report_rgb(dark.as_ptr(), 8, 8, 50, 2.0, &mut report) },
        VigilStatus::InvalidInput
    );
}

#[test]
fn temporal_stream() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { vigil_temporal_new(0, &mut t) }, VigilStatus::InvalidInput);
    assert_eq!(unsafe { vigil_temporal_new(3, &mut t) }, VigilStatus::Ok);
    let smoking = VigilResult {
        probs: [0.1, 0.7, 0.1, 0.1],
        ..Default::default()
    };
    let calling = VigilResult {
        probs: [0.1, 0.1, 0.7, 0.1],
        ..Default::default()
    };
    let mut out = VigilSmoothed::default();
    let mut modes = Vec::new();
    for r in [smoking, smoking, calling, calling] {
        assert_eq!(unsafe { vigil_temporal_push(t, &r, &mut out) }, VigilStatus::Ok);
        modes.push(out.mode_label);
    }
    assert_eq!(modes, [1, 1, 1, 2]);
    assert_eq!(out.frame_index, 3);
    assert!((out.mode_mean - (0.1 + 0.7 + 0.7) / 3.0).abs() < 1e-12);

    let bad = VigilResult {
        probs: [0.9, 0.9, 0.0, 0.0],
        ..Default::default()
    };
    assert_eq!(unsafe { vigil_temporal_push(t, &bad, &mut out) }, VigilStatus::Backend);
    unsafe { vigil_temporal_free(t) };
}

#[test]
fn schedule_and_names() {
    let mut lr = 0.0;
    assert_eq!(unsafe { vigil_cosine_decay_lr(0.1, 100, 0.0, 50, &mut lr) }, VigilStatus::Ok);
    assert!((lr - 0.05).abs() < 1e-15);
    assert_eq!(unsafe { vigil_cosine_decay_lr(0.1, 0, 0.0, 0, &mut lr) }, VigilStatus::InvalidInput);

    let names: Vec<String> = (0..4)
        .map(|i| unsafe { CStr::from_ptr(vigil_label_name(i)) }.to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["normal", "smoking", "calling", "smoking_calling"]);
    assert!(vigil_label_name(4).is_null());
}
