//! Exercises the C entry points the way a foreign caller would: raw buffers,
//! status codes, opaque handles.

use std::ffi::CStr;

use cloudseg_capi::*;

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(cloudseg_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

/// Two-tone test scene: blue sky strip, whitish cloud strip.
fn scene(width: usize, height: usize) -> (Vec<f64>, Vec<u8>) {
    let mut rgb = Vec::with_capacity(width * height * 3);
    let mut labels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let cloud = y >= height / 2;
            let jitter = ((x * 7 + y * 13) % 10) as f64 / 500.0;
            if cloud {
                rgb.extend_from_slice(&[0.78 + jitter, 0.79, 0.80]);
            } else {
                rgb.extend_from_slice(&[0.30 + jitter, 0.52, 0.86]);
            }
            labels.push(cloud as u8);
        }
    }
    (rgb, labels)
}

#[test]
fn version_and_error_strings_are_readable() {
    unsafe {
        let version = CStr::from_ptr(cloudseg_version()).to_str().unwrap();
        assert!(!version.is_empty());
    }
}

#[test]
fn extract_channel_matches_chroma_definition() {
    let rgb = [0.2, 0.7, 0.4, 0.9, 0.1, 0.1];
    let mut out = [0.0f64; 2];
    let status =
        unsafe { cloudseg_extract_channel(rgb.as_ptr(), 2, 1, 16, out.as_mut_ptr()) };
    assert_eq!(status, CloudsegStatus::Ok);
    assert!((out[0] - 0.5).abs() < 1e-15);
    assert!((out[1] - 0.8).abs() < 1e-15);

    let status =
        unsafe { cloudseg_extract_channel(rgb.as_ptr(), 2, 1, 17, out.as_mut_ptr()) };
    assert_eq!(status, CloudsegStatus::Validation);
    assert!(last_error().contains("17"));

    let status =
        unsafe { cloudseg_extract_channel(std::ptr::null(), 2, 1, 16, out.as_mut_ptr()) };
    assert_eq!(status, CloudsegStatus::NullPointer);
}

#[test]
fn train_predict_binarize_score_round_trip() {
    let (rgb, labels) = scene(16, 16);
    let n = 16 * 16;

    // Features: channel c15 extracted through the same C surface.
    let mut c15 = vec![0.0f64; n];
    let status = unsafe { cloudseg_extract_channel(rgb.as_ptr(), 16, 16, 15, c15.as_mut_ptr()) };
    assert_eq!(status, CloudsegStatus::Ok);

    let mut model: *mut CloudsegModel = std::ptr::null_mut();
    let ids = [15u32];
    let status = unsafe {
        cloudseg_model_train(
            c15.as_ptr(),
            n,
            ids.as_ptr(),
            1,
            labels.as_ptr(),
            1,
            &mut model,
        )
    };
    assert_eq!(status, CloudsegStatus::Ok, "{}", last_error());
    assert!(!model.is_null());
    assert_eq!(unsafe { cloudseg_model_num_channels(model) }, 1);

    let mut prob = vec![0.0f64; n];
    let mut degenerate = true;
    let status = unsafe {
        cloudseg_predict(
            model,
            rgb.as_ptr(),
            16,
            16,
            prob.as_mut_ptr(),
            &mut degenerate,
        )
    };
    assert_eq!(status, CloudsegStatus::Ok, "{}", last_error());
    assert!(!degenerate);
    let min = prob.iter().copied().fold(f64::INFINITY, f64::min);
    let max = prob.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(min, 0.0);
    assert_eq!(max, 1.0);

    let mut mask = vec![0u8; n];
    let status = unsafe { cloudseg_binarize(prob.as_ptr(), n, 0.5, mask.as_mut_ptr()) };
    assert_eq!(status, CloudsegStatus::Ok);

    let mut metrics = CloudsegMetrics {
        true_positives: 0,
        true_negatives: 0,
        false_positives: 0,
        false_negatives: 0,
        precision: 0.0,
        recall: 0.0,
        f_score: 0.0,
        misclassification: 0.0,
    };
    let status = unsafe { cloudseg_score(mask.as_ptr(), labels.as_ptr(), n, &mut metrics) };
    assert_eq!(status, CloudsegStatus::Ok);
    assert!(
        metrics.f_score > 0.99,
        "two-tone scene should separate cleanly, F = {}",
        metrics.f_score
    );

    unsafe { cloudseg_model_free(model) };
}

#[test]
fn model_save_load_round_trip_through_files() {
    let (rgb, labels) = scene(12, 12);
    let n = 12 * 12;
    let mut c15 = vec![0.0f64; n];
    unsafe { cloudseg_extract_channel(rgb.as_ptr(), 12, 12, 15, c15.as_mut_ptr()) };

    let mut model: *mut CloudsegModel = std::ptr::null_mut();
    let ids = [15u32];
    let status = unsafe {
        cloudseg_model_train(c15.as_ptr(), n, ids.as_ptr(), 1, labels.as_ptr(), 1, &mut model)
    };
    assert_eq!(status, CloudsegStatus::Ok);

    let dir = tempfile::TempDir::new().unwrap();
    let path = dir.path().join("model.json");
    let c_path = std::ffi::CString::new(path.to_str().unwrap()).unwrap();
    let status = unsafe { cloudseg_model_save(model, c_path.as_ptr(), false) };
    assert_eq!(status, CloudsegStatus::Ok, "{}", last_error());
    // Overwrite refused without force.
    let status = unsafe { cloudseg_model_save(model, c_path.as_ptr(), false) };
    assert_eq!(status, CloudsegStatus::Io);
    assert!(last_error().contains("output exists"));

    let mut loaded: *mut CloudsegModel = std::ptr::null_mut();
    let status = unsafe { cloudseg_model_load(c_path.as_ptr(), &mut loaded) };
    assert_eq!(status, CloudsegStatus::Ok, "{}", last_error());

    // Predictions through the loaded handle match the original.
    let mut a = vec![0.0f64; n];
    let mut b = vec![0.0f64; n];
    unsafe {
        cloudseg_predict(model, rgb.as_ptr(), 12, 12, a.as_mut_ptr(), std::ptr::null_mut());
        cloudseg_predict(loaded, rgb.as_ptr(), 12, 12, b.as_mut_ptr(), std::ptr::null_mut());
    }
    assert_eq!(a, b);

    unsafe {
        cloudseg_model_free(model);
        cloudseg_model_free(loaded);
        cloudseg_model_free(std::ptr::null_mut()); // null is a no-op
    }
}

#[test]
fn degenerate_training_is_reported() {
    // Constant feature: zero variance.
    let features = [0.5f64; 8];
    let labels = [0u8, 1, 0, 1, 0, 1, 0, 1];
    let ids = [15u32];
    let mut model: *mut CloudsegModel = std::ptr::null_mut();
    let status = unsafe {
        cloudseg_model_train(
            features.as_ptr(),
            8,
            ids.as_ptr(),
            1,
            labels.as_ptr(),
            1,
            &mut model,
        )
    };
    assert_eq!(status, CloudsegStatus::Numerical);
    assert!(last_error().contains("zero variance"), "{}", last_error());
}

#[test]
fn generated_header_exposes_the_surface() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/cloudseg.h"
    ))
    .expect("build.rs generates include/cloudseg.h");
    for symbol in [
        "typedef struct CloudsegModel CloudsegModel;",
        "cloudseg_model_train",
        "cloudseg_model_load",
        "cloudseg_model_free",
        "cloudseg_predict",
        "cloudseg_binarize",
        "cloudseg_score",
        "cloudseg_extract_channel",
        "cloudseg_last_error_message",
        "CLOUDSEG_STATUS_OK",
    ] {
        assert!(header.contains(symbol), "header is missing `{symbol}`");
    }
}
