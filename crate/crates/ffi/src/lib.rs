//! C ABI over the cellpk library.
//!
//! Everything crosses the boundary as plain buffers, status codes, and
//! opaque handles. Functions return [`CellpkStatus`]; on failure a
//! thread-local message is readable through [`cellpk_last_error`] until the
//! next call on the same thread. Image buffers are 8-bit RGB, row-major
//! (row, column, channel).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;

use cellpk::augment::{rotate_lossless, RotationAngle};
use cellpk::imgio::Patch;
use cellpk::metric::{kendall_tau_b, pk, unpaired_t_test, TTestVariant};
use cellpk::models;
use cellpk::nn::{forward, read_weight_file, Mode, ModelGraph, Tensor};

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<Vec<u8>>) {
    let text = CString::new(message).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellpkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ComputeError = 3,
    IoError = 4,
}

/// Pair counts and PK value of a prediction against one reference rater.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellpkPkReport {
    pub n_pairs_considered: u64,
    pub concordant: u64,
    pub discordant: u64,
    pub ties_pred_only: u64,
    pub pk: f64,
}

/// t-test variants.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellpkTTestVariant {
    Welch = 0,
    Student = 1,
}

/// Opaque handle around a loaded scoring model.
pub struct CellpkModel {
    graph: ModelGraph<f32>,
    size: usize,
}

/// Last error message for this thread, or null. Valid until the next
/// cellpk call on the same thread.
#[no_mangle]
pub extern "C" fn cellpk_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cellpk_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Prediction probability PK of `prediction` against `reference`
/// (both length `n`).
///
/// # Safety
/// `reference` and `prediction` must point to `n` readable doubles and
/// `out` to a writable report struct.
#[no_mangle]
pub unsafe extern "C" fn cellpk_pk(
    reference: *const f64,
    prediction: *const f64,
    n: usize,
    out: *mut CellpkPkReport,
) -> CellpkStatus {
    clear_error();
    if reference.is_null() || prediction.is_null() || out.is_null() {
        set_error("null pointer argument");
        return CellpkStatus::NullPointer;
    }
    let reference = std::slice::from_raw_parts(reference, n);
    let prediction = std::slice::from_raw_parts(prediction, n);
    match pk(reference, prediction) {
        Ok(report) => {
            *out = CellpkPkReport {
                n_pairs_considered: report.n_pairs_considered,
                concordant: report.concordant,
                discordant: report.discordant,
                ties_pred_only: report.ties_pred_only,
                pk: report.pk,
            };
            CellpkStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            CellpkStatus::ComputeError
        }
    }
}

/// Kendall tau-b of two equal-length samples.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles and `out_tau` to a
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn cellpk_kendall_tau_b(
    x: *const f64,
    y: *const f64,
    n: usize,
    out_tau: *mut f64,
) -> CellpkStatus {
    clear_error();
    if x.is_null() || y.is_null() || out_tau.is_null() {
        set_error("null pointer argument");
        return CellpkStatus::NullPointer;
    }
    let x = std::slice::from_raw_parts(x, n);
    let y = std::slice::from_raw_parts(y, n);
    match kendall_tau_b(x, y) {
        Ok(tau) => {
            *out_tau = tau;
            CellpkStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            CellpkStatus::ComputeError
        }
    }
}

/// Unpaired two-sample t-test; writes the statistic, the degrees of
/// freedom, and the two-tailed p-value.
///
/// # Safety
/// `a`/`b` must point to `na`/`nb` readable doubles; the three out
/// pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cellpk_t_test(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    variant: CellpkTTestVariant,
    out_t: *mut f64,
    out_df: *mut f64,
    out_p: *mut f64,
) -> CellpkStatus {
    clear_error();
    if a.is_null() || b.is_null() || out_t.is_null() || out_df.is_null() || out_p.is_null() {
        set_error("null pointer argument");
        return CellpkStatus::NullPointer;
    }
    let a = std::slice::from_raw_parts(a, na);
    let b = std::slice::from_raw_parts(b, nb);
    let variant = match variant {
        CellpkTTestVariant::Welch => TTestVariant::Welch,
        CellpkTTestVariant::Student => TTestVariant::Student,
    };
    match unpaired_t_test(a, b, variant) {
        Ok(r) => {
            *out_t = r.t_statistic;
            *out_df = r.degrees_of_freedom;
            *out_p = r.p_two_tailed;
            CellpkStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            CellpkStatus::ComputeError
        }
    }
}

/// Lossless rotation of an RGB patch by an integer angle
/// (counterclockwise).
///
/// Writes `width * height * 3` bytes to `out_rgb`; when `out_mask` is
/// non-null it receives `width * height` bytes (1 where full-resolution
/// content was kept, 0 where the resized fit filled in).
///
/// # Safety
/// `rgb` must point to `width * height * 3` readable bytes, `out_rgb` to
/// as many writable bytes, and `out_mask` (when non-null) to
/// `width * height` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cellpk_rotate_lossless(
    rgb: *const u8,
    width: u32,
    height: u32,
    theta_degrees: i32,
    out_rgb: *mut u8,
    out_mask: *mut u8,
) -> CellpkStatus {
    clear_error();
    if rgb.is_null() || out_rgb.is_null() {
        set_error("null pointer argument");
        return CellpkStatus::NullPointer;
    }
    let (w, h) = (width as usize, height as usize);
    let data = std::slice::from_raw_parts(rgb, w * h * 3).to_vec();
    let patch = match Patch::new(w, h, data) {
        Ok(p) => p,
        Err(e) => {
            set_error(e.to_string());
            return CellpkStatus::InvalidArgument;
        }
    };
    let rotated = rotate_lossless(&patch, RotationAngle::new(i64::from(theta_degrees)), "ffi");
    std::ptr::copy_nonoverlapping(rotated.image.data().as_ptr(), out_rgb, w * h * 3);
    if !out_mask.is_null() {
        let mask = std::slice::from_raw_parts_mut(out_mask, w * h);
        for (m, &v) in mask.iter_mut().zip(rotated.valid_crop_mask.data()) {
            *m = u8::from(v);
        }
    }
    CellpkStatus::Ok
}

/// Load a CPKW1 weight file into a scoring model.
///
/// The architecture and input size are inferred from the tensor names;
/// pass `size_hint > 0` to override the input side (required for weight
/// files whose size cannot be inferred).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_model` a writable
/// pointer slot. A returned model must be released with
/// [`cellpk_model_free`].
#[no_mangle]
pub unsafe extern "C" fn cellpk_model_load(
    path: *const c_char,
    size_hint: u32,
    out_model: *mut *mut CellpkModel,
) -> CellpkStatus {
    clear_error();
    if path.is_null() || out_model.is_null() {
        set_error("null pointer argument");
        return CellpkStatus::NullPointer;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => PathBuf::from(s),
        Err(_) => {
            set_error("path is not valid UTF-8");
            return CellpkStatus::InvalidArgument;
        }
    };
    let tensors = match read_weight_file(&path) {
        Ok(t) => t,
        Err(e) => {
            set_error(e.to_string());
            return CellpkStatus::IoError;
        }
    };
    let Some(kind) = models::infer_kind(tensors.keys().map(String::as_str)) else {
        set_error("weight file holds no tensors");
        return CellpkStatus::InvalidArgument;
    };
    let size = if size_hint > 0 {
        size_hint as usize
    } else {
        match models::infer_input_size(kind, &tensors) {
            Some(s) => s,
            None => {
                set_error(format!("cannot infer input size for {kind} weights; pass size_hint"));
                return CellpkStatus::InvalidArgument;
            }
        }
    };
    let mut graph = match models::build(kind, [3, size, size], 0) {
        Ok(g) => g,
        Err(e) => {
            set_error(e.to_string());
            return CellpkStatus::InvalidArgument;
        }
    };
    if let Err(e) = cellpk::nn::load_weights(&mut graph, &path) {
        set_error(e.to_string());
        return CellpkStatus::InvalidArgument;
    }
    *out_model = Box::into_raw(Box::new(CellpkModel { graph, size }));
    CellpkStatus::Ok
}

/// Input side (pixels) the model expects.
///
/// # Safety
/// `model` must come from [`cellpk_model_load`] and not be freed.
#[no_mangle]
pub unsafe extern "C" fn cellpk_model_input_size(model: *const CellpkModel) -> u32 {
    if model.is_null() {
        return 0;
    }
    (*model).size as u32
}

/// Score one RGB patch; the image is resampled to the model's input side
/// if needed. The score lands in [0, 1].
///
/// # Safety
/// `model` must come from [`cellpk_model_load`]; `rgb` must point to
/// `width * height * 3` readable bytes; `out_score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cellpk_model_predict(
    model: *const CellpkModel,
    rgb: *const u8,
    width: u32,
    height: u32,
    out_score: *mut f64,
) -> CellpkStatus {
    clear_error();
    if model.is_null() || rgb.is_null() || out_score.is_null() {
        set_error("null pointer argument");
        return CellpkStatus::NullPointer;
    }
    let model = &*model;
    let (w, h) = (width as usize, height as usize);
    let data = std::slice::from_raw_parts(rgb, w * h * 3).to_vec();
    let patch = match Patch::new(w, h, data) {
        Ok(p) => p,
        Err(e) => {
            set_error(e.to_string());
            return CellpkStatus::InvalidArgument;
        }
    };
    let mut float = patch.to_float();
    if float.width() != model.size || float.height() != model.size {
        let method = if float.width() > model.size || float.height() > model.size {
            cellpk::imgio::ResizeMethod::Area
        } else {
            cellpk::imgio::ResizeMethod::Bilinear
        };
        float = match cellpk::imgio::resize(&float, model.size, model.size, method) {
            Ok(f) => f,
            Err(e) => {
                set_error(e.to_string());
                return CellpkStatus::ComputeError;
            }
        };
    }
    let side = model.size;
    let mut chw = vec![0.0f32; 3 * side * side];
    for y in 0..side {
        for x in 0..side {
            for c in 0..3 {
                chw[c * side * side + y * side + x] = float.get(x, y, c);
            }
        }
    }
    let batch = match Tensor::new(vec![1, 3, side, side], chw) {
        Ok(t) => t,
        Err(e) => {
            set_error(e.to_string());
            return CellpkStatus::ComputeError;
        }
    };
    match forward(&model.graph, &batch, Mode::Eval, 0) {
        Ok(out) => {
            *out_score = f64::from(out.data()[0]);
            CellpkStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            CellpkStatus::ComputeError
        }
    }
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `model` must come from [`cellpk_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cellpk_model_free(model: *mut CellpkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
