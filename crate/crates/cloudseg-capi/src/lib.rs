//! C ABI over the cloudseg pipeline: opaque model handles, status codes and
//! buffer-based predict/binarize/score entry points. The header is generated
//! into `include/cloudseg.h` at build time.
//!
//! Conventions: images are row-major interleaved RGB `f64` in [0,1]; masks
//! and labels are `u8` with 0 = sky, 1 = cloud; probability buffers are
//! `f64` in [0,1]. Every fallible call returns a [`CloudsegStatus`]; on
//! failure a thread-local message is readable via
//! [`cloudseg_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use cloudseg::color::ChannelId;
use cloudseg::error::Error;
use cloudseg::image::{GroundTruthMask, Image};
use cloudseg::pls::{self, FeatureMatrix, PlsModel, ProbabilityMap};
use cloudseg::{dataset, eval};

/// Status codes mirroring the CLI exit-code contract.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudsegStatus {
    Ok = 0,
    /// Invalid argument or malformed input data.
    Validation = 1,
    /// File system or codec failure.
    Io = 2,
    /// Numerical failure (degenerate regression or ground truth).
    Numerical = 3,
    /// A required pointer argument was null.
    NullPointer = 4,
}

/// Opaque handle to a trained PLS segmentation model.
pub struct CloudsegModel {
    inner: PlsModel,
}

/// Confusion counts and derived rates for one scored mask pair.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CloudsegMetrics {
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub misclassification: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &Error) -> CloudsegStatus {
    set_error(&err.to_string());
    match err.exit_code() {
        1 => CloudsegStatus::Validation,
        2 => CloudsegStatus::Io,
        _ => CloudsegStatus::Numerical,
    }
}

fn fail_null(what: &str) -> CloudsegStatus {
    set_error(&format!("null pointer: {what}"));
    CloudsegStatus::NullPointer
}

fn fail_validation(msg: &str) -> CloudsegStatus {
    set_error(msg);
    CloudsegStatus::Validation
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cloudseg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static UTF-8 string.
#[no_mangle]
pub extern "C" fn cloudseg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, CloudsegStatus> {
    if ptr.is_null() {
        return Err(fail_null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail_validation(&format!("{what} is not valid UTF-8")))
}

fn channel_list(ids: &[u32]) -> Result<Vec<ChannelId>, CloudsegStatus> {
    ids.iter()
        .map(|id| {
            if (1..=16).contains(id) {
                ChannelId::from_index(*id as usize - 1).map_err(|e| fail(&e))
            } else {
                Err(fail_validation(&format!(
                    "channel id {id} outside 1..=16"
                )))
            }
        })
        .collect()
}

unsafe fn image_from_raw(
    rgb: *const f64,
    width: usize,
    height: usize,
) -> Result<Image, CloudsegStatus> {
    if rgb.is_null() {
        return Err(fail_null("rgb"));
    }
    if width == 0 || height == 0 {
        return Err(fail_validation("image dimensions must be positive"));
    }
    let data = std::slice::from_raw_parts(rgb, width * height * 3);
    let pixels: Vec<[f64; 3]> = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Image::new(width, height, pixels).map_err(|e| fail(&e))
}

/// Extracts channel `channel_id` (1..=16, the c1..c16 numbering) of a
/// `width*height*3` RGB buffer into `out` (`width*height` doubles).
///
/// # Safety
/// `rgb` must point to `width*height*3` doubles and `out` to `width*height`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cloudseg_extract_channel(
    rgb: *const f64,
    width: usize,
    height: usize,
    channel_id: u32,
    out: *mut f64,
) -> CloudsegStatus {
    if out.is_null() {
        return fail_null("out");
    }
    let channels = match channel_list(&[channel_id]) {
        Ok(c) => c,
        Err(s) => return s,
    };
    let img = match image_from_raw(rgb, width, height) {
        Ok(i) => i,
        Err(s) => return s,
    };
    let map = cloudseg::color::extract_channel(&img, channels[0]);
    std::ptr::copy_nonoverlapping(map.values.as_ptr(), out, map.values.len());
    CloudsegStatus::Ok
}

/// Trains a PLS model from a row-major `rows x n_channels` feature matrix
/// and 0/1 labels, with `components` latent components.
///
/// # Safety
/// `features` must point to `rows*n_channels` doubles, `labels` to `rows`
/// bytes, `channel_ids` to `n_channels` ids, and `out_model` to a writable
/// pointer slot. On success the caller owns the handle and must release it
/// with [`cloudseg_model_free`].
#[no_mangle]
pub unsafe extern "C" fn cloudseg_model_train(
    features: *const f64,
    rows: usize,
    channel_ids: *const u32,
    n_channels: usize,
    labels: *const u8,
    components: usize,
    out_model: *mut *mut CloudsegModel,
) -> CloudsegStatus {
    if out_model.is_null() {
        return fail_null("out_model");
    }
    if features.is_null() || labels.is_null() || channel_ids.is_null() {
        return fail_null("features/labels/channel_ids");
    }
    let ids = std::slice::from_raw_parts(channel_ids, n_channels);
    let channels = match channel_list(ids) {
        Ok(c) => c,
        Err(s) => return s,
    };
    let data = std::slice::from_raw_parts(features, rows * n_channels).to_vec();
    let matrix = match FeatureMatrix::new(rows, channels, data) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let y: Vec<f64> = std::slice::from_raw_parts(labels, rows)
        .iter()
        .map(|l| *l as f64)
        .collect();
    match pls::train(&matrix, &y, components) {
        Ok(model) => {
            *out_model = Box::into_raw(Box::new(CloudsegModel { inner: model }));
            CloudsegStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Loads a model JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 path; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cloudseg_model_load(
    path: *const c_char,
    out_model: *mut *mut CloudsegModel,
) -> CloudsegStatus {
    if out_model.is_null() {
        return fail_null("out_model");
    }
    let path = match str_arg(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match dataset::load_model(path) {
        Ok(model) => {
            *out_model = Box::into_raw(Box::new(CloudsegModel { inner: model }));
            CloudsegStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Saves a model to a JSON file, refusing to overwrite unless `force`.
///
/// # Safety
/// `model` must be a live handle from this library; `path` a NUL-terminated
/// UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn cloudseg_model_save(
    model: *const CloudsegModel,
    path: *const c_char,
    force: bool,
) -> CloudsegStatus {
    let Some(model) = model.as_ref() else {
        return fail_null("model");
    };
    let path = match str_arg(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match dataset::save_model(&model.inner, path, force) {
        Ok(()) => CloudsegStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// Number of input channels the model consumes.
///
/// # Safety
/// `model` must be a live handle (null returns 0).
#[no_mangle]
pub unsafe extern "C" fn cloudseg_model_num_channels(model: *const CloudsegModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.channel_ids.len())
}

/// Releases a model handle. Passing null is a no-op.
///
/// # Safety
/// `model` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn cloudseg_model_free(model: *mut CloudsegModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicts the per-pixel cloud belongingness map of an RGB image into
/// `prob_out` (`width*height` doubles in [0,1], min-max normalized per
/// image). `degenerate_out` (optional) reports a constant raw prediction.
///
/// # Safety
/// `rgb` must point to `width*height*3` doubles and `prob_out` to
/// `width*height` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cloudseg_predict(
    model: *const CloudsegModel,
    rgb: *const f64,
    width: usize,
    height: usize,
    prob_out: *mut f64,
    degenerate_out: *mut bool,
) -> CloudsegStatus {
    let Some(model) = model.as_ref() else {
        return fail_null("model");
    };
    if prob_out.is_null() {
        return fail_null("prob_out");
    }
    let img = match image_from_raw(rgb, width, height) {
        Ok(i) => i,
        Err(s) => return s,
    };
    match pls::predict_image(&model.inner, &img) {
        Ok(prob) => {
            std::ptr::copy_nonoverlapping(prob.values.as_ptr(), prob_out, prob.values.len());
            if !degenerate_out.is_null() {
                *degenerate_out = prob.degenerate;
            }
            CloudsegStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Thresholds a probability buffer into a 0/1 mask (`value >= threshold` is
/// cloud).
///
/// # Safety
/// `prob` must point to `len` doubles and `mask_out` to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cloudseg_binarize(
    prob: *const f64,
    len: usize,
    threshold: f64,
    mask_out: *mut u8,
) -> CloudsegStatus {
    if prob.is_null() || mask_out.is_null() {
        return fail_null("prob/mask_out");
    }
    let values = std::slice::from_raw_parts(prob, len).to_vec();
    if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return fail_validation(&format!("probability {bad} outside [0,1]"));
    }
    let map = ProbabilityMap {
        width: len.max(1),
        height: 1,
        values,
        degenerate: false,
    };
    if len == 0 {
        return fail_validation("empty probability buffer");
    }
    match pls::binarize(&map, threshold) {
        Ok(mask) => {
            std::ptr::copy_nonoverlapping(mask.labels().as_ptr(), mask_out, len);
            CloudsegStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Scores a predicted 0/1 mask against ground truth.
///
/// # Safety
/// `pred` and `gt` must point to `len` bytes each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cloudseg_score(
    pred: *const u8,
    gt: *const u8,
    len: usize,
    out: *mut CloudsegMetrics,
) -> CloudsegStatus {
    if pred.is_null() || gt.is_null() || out.is_null() {
        return fail_null("pred/gt/out");
    }
    if len == 0 {
        return fail_validation("empty masks");
    }
    let to_mask = |ptr: *const u8| -> Result<GroundTruthMask, Error> {
        GroundTruthMask::new(len, 1, std::slice::from_raw_parts(ptr, len).to_vec())
    };
    let pred = match to_mask(pred) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let gt = match to_mask(gt) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    match eval::score(&pred, &gt) {
        Ok(m) => {
            *out = CloudsegMetrics {
                true_positives: m.true_positives,
                true_negatives: m.true_negatives,
                false_positives: m.false_positives,
                false_negatives: m.false_negatives,
                precision: m.precision,
                recall: m.recall,
                f_score: m.f_score,
                misclassification: m.misclassification,
            };
            CloudsegStatus::Ok
        }
        Err(e) => fail(&e),
    }
}
