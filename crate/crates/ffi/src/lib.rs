//! C ABI over `emofeat`.
//!
//! Models are opaque handles created by `*_load` and released by `*_free`.
//! Every fallible function returns an [`EmofeatStatus`]; on failure the
//! message is available from [`emofeat_last_error`] on the same thread.
//! Output buffers are caller-owned and their lengths are checked.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use emofeat::audio::{normalize_local, AudioChunk};
use emofeat::eval::{uar_with, ConfusionMatrix, UarMode};
use emofeat::nn::Tensor;
use emofeat::samplecnn::{load_checkpoint, pool_features, SampleCnnModel};
use emofeat::svm::{load_svm_model, SvmModel};
use emofeat::Error;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmofeatStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad length, dimension, mode or other argument.
    InvalidArgument = 2,
    Io = 3,
    /// Malformed file contents (checkpoint, model JSON, audio).
    Format = 4,
    /// Inputs that are well-formed but unusable, e.g. an empty matrix.
    Data = 5,
    NonFinite = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

/// Feature extractor loaded from a checkpoint.
pub struct EmofeatModel {
    model: SampleCnnModel<f32>,
}

/// Standardizer plus one-vs-rest linear SVM.
pub struct EmofeatSvm {
    model: SvmModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> EmofeatStatus {
    match err {
        Error::Contract(_) | Error::Config(_) => EmofeatStatus::InvalidArgument,
        Error::Io { .. } => EmofeatStatus::Io,
        Error::Decode { .. }
        | Error::UnsupportedFormat(_)
        | Error::Parse { .. }
        | Error::Corrupt { .. }
        | Error::Json(_) => EmofeatStatus::Format,
        Error::NonFinite(_) => EmofeatStatus::NonFinite,
        Error::Data(_) | Error::UninitializedStats => EmofeatStatus::Data,
    }
}

struct Fail(EmofeatStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(EmofeatStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EmofeatStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EmofeatStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EmofeatStatus::Internal
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(
            EmofeatStatus::NullPointer,
            format!("`{what}` is null"),
        ))
    } else {
        Ok(())
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Fail> {
    non_null(path, "path")?;
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn expect_len(what: &str, got: usize, want: usize) -> Result<(), Fail> {
    if got == want {
        Ok(())
    } else {
        Err(invalid(format!(
            "`{what}` has length {got}, expected {want}"
        )))
    }
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn emofeat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn emofeat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn emofeat_model_load(
    path: *const c_char,
    out: *mut *mut EmofeatModel,
) -> EmofeatStatus {
    guard(|| {
        non_null(out, "out")?;
        let ckpt = load_checkpoint(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(EmofeatModel { model: ckpt.model }));
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from [`emofeat_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn emofeat_model_free(model: *mut EmofeatModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Samples per chunk the model expects.
///
/// # Safety
/// `model` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn emofeat_model_input_len(model: *const EmofeatModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.config.input_len)
}

/// Length of one pooled feature vector.
///
/// # Safety
/// `model` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn emofeat_model_pooled_dim(model: *const EmofeatModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.config.pooled_dim())
}

/// Pooled features for `n_chunks` consecutive chunks of `input_len` 16 kHz
/// samples each. Every chunk is mean-normalized, run in inference mode and
/// mean+max pooled, as in file extraction. `out` receives
/// `n_chunks * pooled_dim` values.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn emofeat_model_features(
    model: *const EmofeatModel,
    samples: *const f32,
    samples_len: usize,
    n_chunks: usize,
    out: *mut f32,
    out_len: usize,
) -> EmofeatStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &(*model).model;
        let len = m.config.input_len;
        if n_chunks == 0 {
            return Err(invalid("`n_chunks` must be positive"));
        }
        expect_len("samples", samples_len, n_chunks * len)?;
        expect_len("out", out_len, n_chunks * m.config.pooled_dim())?;
        let samples = slice(samples, samples_len, "samples")?;
        let out = slice_mut(out, out_len, "out")?;
        let mut data = Vec::with_capacity(samples_len);
        for (i, c) in samples.chunks_exact(len).enumerate() {
            let chunk = AudioChunk {
                samples: c.to_vec(),
                source_id: "ffi".into(),
                start_sample: i * len,
            };
            data.extend(normalize_local(&chunk).samples);
        }
        let batch = Tensor::new(vec![n_chunks, len, 1], data)?;
        let pooled = pool_features(&m.features(&batch)?)?;
        out.copy_from_slice(pooled.data());
        Ok(())
    })
}

/// Mean then max over time of a `steps x channels` row-major map. `out`
/// receives `2 * channels` values.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn emofeat_pool(
    fmap: *const f32,
    steps: usize,
    channels: usize,
    out: *mut f32,
    out_len: usize,
) -> EmofeatStatus {
    guard(|| {
        expect_len("out", out_len, 2 * channels)?;
        let values = slice(fmap, steps * channels, "fmap")?;
        let out = slice_mut(out, out_len, "out")?;
        let t = Tensor::new(vec![1, steps, channels], values.to_vec())?;
        out.copy_from_slice(pool_features(&t)?.data());
        Ok(())
    })
}

/// Loads a saved SVM model.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn emofeat_svm_load(
    path: *const c_char,
    out: *mut *mut EmofeatSvm,
) -> EmofeatStatus {
    guard(|| {
        non_null(out, "out")?;
        let model = load_svm_model(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(EmofeatSvm { model }));
        Ok(())
    })
}

/// Releases an SVM model. NULL is ignored.
///
/// # Safety
/// `svm` must come from [`emofeat_svm_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn emofeat_svm_free(svm: *mut EmofeatSvm) {
    if !svm.is_null() {
        drop(Box::from_raw(svm));
    }
}

/// Number of classes, or 0 for NULL.
///
/// # Safety
/// `svm` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn emofeat_svm_num_classes(svm: *const EmofeatSvm) -> usize {
    svm.as_ref().map_or(0, |s| s.model.linear.num_classes())
}

/// Input feature dimension, or 0 for NULL.
///
/// # Safety
/// `svm` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn emofeat_svm_dim(svm: *const EmofeatSvm) -> usize {
    svm.as_ref().map_or(0, |s| s.model.standardizer.dim())
}

/// One decision score per class for a raw (unstandardized) feature vector.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn emofeat_svm_decision(
    svm: *const EmofeatSvm,
    x: *const f64,
    dim: usize,
    scores: *mut f64,
    num_classes: usize,
) -> EmofeatStatus {
    guard(|| {
        non_null(svm, "svm")?;
        let s = &(*svm).model;
        expect_len("scores", num_classes, s.linear.num_classes())?;
        let x = slice(x, dim, "x")?;
        let out = slice_mut(scores, num_classes, "scores")?;
        out.copy_from_slice(&s.decision(x)?);
        Ok(())
    })
}

/// Predicted class index (highest score, lowest index on ties).
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn emofeat_svm_predict(
    svm: *const EmofeatSvm,
    x: *const f64,
    dim: usize,
    class_out: *mut usize,
) -> EmofeatStatus {
    guard(|| {
        non_null(svm, "svm")?;
        non_null(class_out, "class_out")?;
        *class_out = (*svm).model.predict(slice(x, dim, "x")?)?;
        Ok(())
    })
}

/// Unweighted average recall of a `k x k` row-major confusion matrix
/// (rows truth). `strict` nonzero counts classes without support as
/// recall 0; otherwise they are left out.
///
/// # Safety
/// `counts` must hold `k * k` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn emofeat_uar(
    counts: *const u64,
    k: usize,
    strict: i32,
    out: *mut f64,
) -> EmofeatStatus {
    guard(|| {
        non_null(out, "out")?;
        if k == 0 {
            return Err(invalid("`k` must be positive"));
        }
        let flat = slice(counts, k * k, "counts")?;
        let cm = ConfusionMatrix {
            counts: flat.chunks_exact(k).map(<[u64]>::to_vec).collect(),
        };
        let mode = if strict != 0 {
            UarMode::Strict
        } else {
            UarMode::Standard
        };
        *out = uar_with(&cm, mode)?;
        Ok(())
    })
}
