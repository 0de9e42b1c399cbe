//! C interface to the texture benchmark.
//!
//! Every fallible function returns a [`TbStatus`]; on failure a message for
//! the calling thread is available from [`tb_last_error_message`]. Objects are
//! handed out as opaque pointers and must be released with their `_free`
//! function. Images are row-major `double` arrays of gray levels in `[0, 255]`.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::path::PathBuf;

use ndarray::ArrayView1;
use texturebench::Error;
use texturebench::classifiers::{ClassifierSpec, Model, Pipeline, TrainedPipeline};
use texturebench::dataset::GrayImage;
use texturebench::eval::{cross_validate, kfold_split};
use texturebench::featstore::{self, FeatureMatrix, FeatureMeta};
use texturebench::hog::{HogParams, hog_features};
use texturebench::lbp::{LbpParams, lbp_histogram, necklace_count};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    BufferTooSmall = 4,
    Io = 5,
    Parse = 6,
    Dataset = 7,
    Panic = 8,
}

/// A feature matrix with one class label per row.
pub struct TbFeatureMatrix {
    inner: FeatureMatrix,
}

/// A trained classifier together with its class names.
pub struct TbModel {
    model: TrainedPipeline,
    class_names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(TbStatus, String);

fn status_of(e: &Error) -> TbStatus {
    match e {
        Error::Param(_) => TbStatus::InvalidArgument,
        Error::Dimension { .. } => TbStatus::DimensionMismatch,
        Error::Io { .. } => TbStatus::Io,
        Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => TbStatus::Parse,
        Error::Decode { .. } | Error::Dataset(_) => TbStatus::Dataset,
        Error::Fold { source, .. } => status_of(source),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: TbStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            TbStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal error: {message}"));
            TbStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(fail(TbStatus::NullPointer, format!("{what} is null")));
    }
    Ok(())
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn string_arg(p: *const c_char, what: &str) -> Result<String, Failure> {
    non_null(p, what)?;
    // SAFETY: checked non-null; the caller guarantees termination.
    let s = unsafe { CStr::from_ptr(p) };
    s.to_str()
        .map(str::to_string)
        .map_err(|_| fail(TbStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// # Safety
/// `pixels` must point to `width * height` readable doubles.
unsafe fn image_arg(pixels: *const f64, width: usize, height: usize) -> Result<GrayImage, Failure> {
    non_null(pixels, "pixels")?;
    let len = width
        .checked_mul(height)
        .ok_or_else(|| fail(TbStatus::InvalidArgument, "image size overflows"))?;
    // SAFETY: the caller guarantees `len` readable values.
    let data = unsafe { std::slice::from_raw_parts(pixels, len) }.to_vec();
    Ok(GrayImage::new(width, height, data)?)
}

/// # Safety
/// `out` must point to `out_len` writable doubles; `written` must be writable.
unsafe fn copy_out(values: &[f64], out: *mut f64, out_len: usize, written: *mut usize) -> Result<(), Failure> {
    non_null(written, "written")?;
    // SAFETY: checked non-null.
    unsafe { *written = values.len() };
    if values.len() > out_len {
        return Err(fail(
            TbStatus::BufferTooSmall,
            format!("output needs {} values, buffer holds {out_len}", values.len()),
        ));
    }
    non_null(out, "out")?;
    // SAFETY: the caller guarantees `out_len >= values.len()` writable values.
    unsafe { std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len()) };
    Ok(())
}

fn parse_spec(json: &str) -> Result<Pipeline, Failure> {
    serde_json::from_str::<Pipeline>(json)
        .or_else(|_| serde_json::from_str::<ClassifierSpec>(json).map(Pipeline::from))
        .map_err(|e| fail(TbStatus::Parse, format!("classifier spec: {e}")))
}

/// Message describing the last failed call on this thread; empty after a
/// successful call. Valid until the next call into this library on the thread.
#[unsafe(no_mangle)]
pub extern "C" fn tb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[unsafe(no_mangle)]
pub extern "C" fn tb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Number of rotation classes of `points`-bit patterns (the LBP histogram length).
///
/// # Safety
/// `out` must be a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_necklace_count(points: usize, out: *mut u64) -> TbStatus {
    guard(|| {
        non_null(out, "out")?;
        let n = necklace_count(points)?;
        // SAFETY: checked non-null.
        unsafe { *out = n };
        Ok(())
    })
}

/// Rotation-invariant LBP histogram of an image. `*written` receives the
/// histogram length even when `out_len` is too small.
///
/// # Safety
/// `pixels` holds `width * height` doubles; `out` holds `out_len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_lbp_histogram(
    pixels: *const f64,
    width: usize,
    height: usize,
    points: usize,
    radius: f64,
    normalize: bool,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> TbStatus {
    guard(|| {
        // SAFETY: forwarded caller guarantees.
        let img = unsafe { image_arg(pixels, width, height) }?;
        let params = LbpParams::new(points, radius)?;
        let hist = lbp_histogram(&img, &params, normalize)?;
        // SAFETY: forwarded caller guarantees.
        unsafe { copy_out(&hist.bins, out, out_len, written) }
    })
}

fn hog_params(cell: usize, block: usize, bins: usize, signed: bool) -> Result<HogParams, Failure> {
    let p = HogParams {
        cell_size: cell,
        block_size: block,
        orientation_bins: bins,
        signed,
    };
    p.validate()?;
    Ok(p)
}

/// HOG descriptor length for an image size.
///
/// # Safety
/// `out` must be a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_hog_len(
    width: usize,
    height: usize,
    cell: usize,
    block: usize,
    bins: usize,
    out: *mut usize,
) -> TbStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = hog_params(cell, block, bins, false)?;
        // SAFETY: checked non-null.
        unsafe { *out = p.descriptor_len(width, height) };
        Ok(())
    })
}

/// HOG descriptor of an image.
///
/// # Safety
/// `pixels` holds `width * height` doubles; `out` holds `out_len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_hog_features(
    pixels: *const f64,
    width: usize,
    height: usize,
    cell: usize,
    block: usize,
    bins: usize,
    signed_orientations: bool,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> TbStatus {
    guard(|| {
        // SAFETY: forwarded caller guarantees.
        let img = unsafe { image_arg(pixels, width, height) }?;
        let d = hog_features(&img, &hog_params(cell, block, bins, signed_orientations)?)?;
        // SAFETY: forwarded caller guarantees.
        unsafe { copy_out(&d.values, out, out_len, written) }
    })
}

/// Builds a matrix from `rows * cols` row-major values and `rows` labels.
///
/// # Safety
/// `data` holds `rows * cols` doubles, `labels` holds `rows` strings;
/// `extractor` and `params` are strings; `out` is writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_features_new(
    data: *const f64,
    rows: usize,
    cols: usize,
    labels: *const *const c_char,
    extractor: *const c_char,
    params: *const c_char,
    out: *mut *mut TbFeatureMatrix,
) -> TbStatus {
    guard(|| {
        non_null(out, "out")?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(TbStatus::InvalidArgument, "matrix size overflows"))?;
        let values = if len == 0 {
            Vec::new()
        } else {
            non_null(data, "data")?;
            // SAFETY: the caller guarantees `len` readable values.
            unsafe { std::slice::from_raw_parts(data, len) }.to_vec()
        };
        let mut names = Vec::with_capacity(rows);
        if rows > 0 {
            non_null(labels, "labels")?;
        }
        for i in 0..rows {
            // SAFETY: the caller guarantees `rows` label pointers.
            names.push(unsafe { string_arg(*labels.add(i), "label") }?);
        }
        let meta = FeatureMeta {
            // SAFETY: forwarded caller guarantees.
            extractor: unsafe { string_arg(extractor, "extractor") }?,
            params: unsafe { string_arg(params, "params") }?,
            source: None,
        };
        let array = ndarray::Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| fail(TbStatus::InvalidArgument, e.to_string()))?;
        let m = FeatureMatrix::new(array, names, meta)?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(TbFeatureMatrix { inner: m })) };
        Ok(())
    })
}

/// Reads a feature file.
///
/// # Safety
/// `path` is a string; `out` is writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_features_read(path: *const c_char, out: *mut *mut TbFeatureMatrix) -> TbStatus {
    guard(|| {
        non_null(out, "out")?;
        // SAFETY: forwarded caller guarantees.
        let path = PathBuf::from(unsafe { string_arg(path, "path") }?);
        let m = featstore::read_features(&path)?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(TbFeatureMatrix { inner: m })) };
        Ok(())
    })
}

/// Writes a feature file.
///
/// # Safety
/// `matrix` comes from this library; `path` is a string.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_features_write(matrix: *const TbFeatureMatrix, path: *const c_char) -> TbStatus {
    guard(|| {
        non_null(matrix, "matrix")?;
        // SAFETY: forwarded caller guarantees.
        let path = PathBuf::from(unsafe { string_arg(path, "path") }?);
        // SAFETY: checked non-null; a live handle from this library.
        featstore::write_features(&path, unsafe { &(*matrix).inner })?;
        Ok(())
    })
}

/// Number of rows; 0 for a null handle.
///
/// # Safety
/// `matrix` is null or comes from this library.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_features_rows(matrix: *const TbFeatureMatrix) -> usize {
    // SAFETY: null or a live handle.
    unsafe { matrix.as_ref() }.map_or(0, |m| m.inner.n_samples())
}

/// Number of columns; 0 for a null handle.
///
/// # Safety
/// `matrix` is null or comes from this library.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_features_cols(matrix: *const TbFeatureMatrix) -> usize {
    // SAFETY: null or a live handle.
    unsafe { matrix.as_ref() }.map_or(0, |m| m.inner.dim())
}

/// Copies row `row` into `out`.
///
/// # Safety
/// `matrix` comes from this library; `out` holds `out_len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_features_row(
    matrix: *const TbFeatureMatrix,
    row: usize,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> TbStatus {
    guard(|| {
        non_null(matrix, "matrix")?;
        // SAFETY: checked non-null; a live handle.
        let m = unsafe { &(*matrix).inner };
        if row >= m.n_samples() {
            return Err(fail(
                TbStatus::InvalidArgument,
                format!("row {row} out of range for {} rows", m.n_samples()),
            ));
        }
        let values = m.row(row).to_vec();
        // SAFETY: forwarded caller guarantees.
        unsafe { copy_out(&values, out, out_len, written) }
    })
}

/// Releases a matrix. Null is ignored.
///
/// # Safety
/// `matrix` is null or a handle not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_features_free(matrix: *mut TbFeatureMatrix) {
    if !matrix.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(matrix) });
    }
}

/// Trains a classifier on all rows. `spec_json` is either a classifier spec
/// (`{"kind":"svm",...}`) or a pipeline (`{"standardize":true,"classifier":{...}}`).
///
/// # Safety
/// `matrix` comes from this library; `spec_json` is a string; `out` is writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_model_train(
    matrix: *const TbFeatureMatrix,
    spec_json: *const c_char,
    out: *mut *mut TbModel,
) -> TbStatus {
    guard(|| {
        non_null(matrix, "matrix")?;
        non_null(out, "out")?;
        // SAFETY: forwarded caller guarantees.
        let pipeline = parse_spec(&unsafe { string_arg(spec_json, "spec_json") }?)?;
        // SAFETY: checked non-null; a live handle.
        let m = unsafe { &(*matrix).inner };
        let (y, names) = m.encode_labels();
        let model = pipeline.train(m.data(), &y, names.len())?;
        let class_names = names
            .into_iter()
            .map(|n| CString::new(n).map_err(|_| fail(TbStatus::InvalidArgument, "label contains NUL")))
            .collect::<Result<Vec<_>, _>>()?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(TbModel { model, class_names })) };
        Ok(())
    })
}

/// Predicts the class index of one feature vector.
///
/// # Safety
/// `model` comes from this library; `x` holds `len` doubles; `class_out` is writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_model_predict(
    model: *const TbModel,
    x: *const f64,
    len: usize,
    class_out: *mut usize,
) -> TbStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(x, "x")?;
        non_null(class_out, "class_out")?;
        // SAFETY: checked non-null; the caller guarantees `len` values.
        let (m, xs) = unsafe { (&(*model).model, std::slice::from_raw_parts(x, len)) };
        let c = m.predict_one(ArrayView1::from(xs))?;
        // SAFETY: checked non-null.
        unsafe { *class_out = c };
        Ok(())
    })
}

/// Number of classes the model was trained on; 0 for a null handle.
///
/// # Safety
/// `model` is null or comes from this library.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_model_class_count(model: *const TbModel) -> usize {
    // SAFETY: null or a live handle.
    unsafe { model.as_ref() }.map_or(0, |m| m.class_names.len())
}

/// Name of class `class`, owned by the model; null when out of range.
///
/// # Safety
/// `model` is null or comes from this library.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_model_class_name(model: *const TbModel, class: usize) -> *const c_char {
    // SAFETY: null or a live handle.
    unsafe { model.as_ref() }
        .and_then(|m| m.class_names.get(class))
        .map_or(std::ptr::null(), |c| c.as_ptr())
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` is null or a handle not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_model_free(model: *mut TbModel) {
    if !model.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// k-fold cross-validation; writes the mean and sample standard deviation of
/// the fold accuracies, in percent.
///
/// # Safety
/// `matrix` comes from this library; `spec_json` is a string; outputs are writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn tb_cross_validate(
    matrix: *const TbFeatureMatrix,
    spec_json: *const c_char,
    k: usize,
    seed: u64,
    stratified: bool,
    mean_out: *mut f64,
    std_out: *mut f64,
) -> TbStatus {
    guard(|| {
        non_null(matrix, "matrix")?;
        non_null(mean_out, "mean_out")?;
        non_null(std_out, "std_out")?;
        // SAFETY: forwarded caller guarantees.
        let pipeline = parse_spec(&unsafe { string_arg(spec_json, "spec_json") }?)?;
        // SAFETY: checked non-null; a live handle.
        let m = unsafe { &(*matrix).inner };
        let (y, _) = m.encode_labels();
        let plan = kfold_split(m.n_samples(), &y, k, seed, stratified)?;
        let report = cross_validate(m, &pipeline, &plan)?;
        // SAFETY: checked non-null.
        unsafe {
            *mean_out = report.mean;
            *std_out = report.std;
        }
        Ok(())
    })
}
