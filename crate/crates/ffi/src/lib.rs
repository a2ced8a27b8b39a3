//! C ABI for the wavecnet transforms and saved toy models.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every fallible call returns a [`WcStatus`]; on failure
//! [`wc_last_error`] describes the problem until the next call on the same
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wavecnet::netlab::Model;
use wavecnet::transforms::{self, Bands1d, Bands2d};
use wavecnet::{BoundaryMode, Error, Tensor, WaveletSpec};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownWavelet = 3,
    InvalidExtent = 4,
    ShapeMismatch = 5,
    NonFiniteInput = 6,
    Io = 7,
    Format = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcBoundary {
    Periodic = 0,
    Truncate = 1,
}

impl From<WcBoundary> for BoundaryMode {
    fn from(b: WcBoundary) -> Self {
        match b {
            WcBoundary::Periodic => BoundaryMode::Periodic,
            WcBoundary::Truncate => BoundaryMode::Truncate,
        }
    }
}

/// A filter bank.
pub struct WcWavelet {
    spec: WaveletSpec,
}

/// A trained toy classifier.
pub struct WcModel {
    model: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WcStatus {
    match e {
        Error::UnknownWavelet(_) => WcStatus::UnknownWavelet,
        Error::InvalidExtent { .. } => WcStatus::InvalidExtent,
        Error::ShapeMismatch(_) | Error::BandShapeMismatch(_) | Error::LengthMismatch(..) => WcStatus::ShapeMismatch,
        Error::NonFiniteInput => WcStatus::NonFiniteInput,
        Error::Io(_) => WcStatus::Io,
        Error::Json(_)
        | Error::BadMagic(_)
        | Error::UnsupportedVersion(_)
        | Error::TruncatedPayload { .. }
        | Error::DuplicateName(_)
        | Error::MalformedHeader(_) => WcStatus::Format,
        _ => WcStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (WcStatus, String)>) -> WcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            WcStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, (WcStatus, String)>;
}

impl<T> OrStatus<T> for wavecnet::Result<T> {
    fn or_status(self) -> Result<T, (WcStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (WcStatus, String) {
    (WcStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, (WcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (WcStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (WcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (WcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn tensor(shape: &[usize], data: &[f64]) -> Result<Tensor, (WcStatus, String)> {
    Tensor::new(shape.to_vec(), data.to_vec()).or_status()
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn wc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Looks up a built-in wavelet (`haar`, `db1`..`db6`, `ch2.2`..`ch5.5`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_wavelet_new(name: *const c_char, out: *mut *mut WcWavelet) -> WcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = wavecnet::get_wavelet(cstr(name, "name")?).or_status()?;
        *out = Box::into_raw(Box::new(WcWavelet { spec }));
        Ok(())
    })
}

/// # Safety
/// `w` must come from [`wc_wavelet_new`] and not be used afterwards; null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn wc_wavelet_free(w: *mut WcWavelet) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Filter length of the bank, or 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wc_wavelet_filter_len(w: *const WcWavelet) -> usize {
    w.as_ref().map_or(0, |w| w.spec.support_len)
}

/// One-level 1D DWT of `x[n]` into `lo[n/2]` and `hi[n/2]`.
///
/// # Safety
/// Buffers must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn wc_dwt1d(
    w: *const WcWavelet,
    x: *const f64,
    n: usize,
    boundary: WcBoundary,
    lo: *mut f64,
    hi: *mut f64,
) -> WcStatus {
    guard(|| {
        let w = w.as_ref().ok_or_else(|| null("w"))?;
        let b = transforms::dwt1d(&tensor(&[n], input(x, n, "x")?)?, &w.spec, boundary.into()).or_status()?;
        output(lo, n / 2, "lo")?.copy_from_slice(b.low.data());
        output(hi, n / 2, "hi")?.copy_from_slice(b.high.data());
        Ok(())
    })
}

/// Inverse of [`wc_dwt1d`]: `lo[half]`, `hi[half]` into `out[n]`.
///
/// # Safety
/// Buffers must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn wc_idwt1d(
    w: *const WcWavelet,
    lo: *const f64,
    hi: *const f64,
    half: usize,
    boundary: WcBoundary,
    out: *mut f64,
    n: usize,
) -> WcStatus {
    guard(|| {
        let w = w.as_ref().ok_or_else(|| null("w"))?;
        let bands =
            Bands1d { low: tensor(&[half], input(lo, half, "lo")?)?, high: tensor(&[half], input(hi, half, "hi")?)? };
        let x = transforms::idwt1d(&bands, &w.spec, boundary.into(), n).or_status()?;
        output(out, n, "out")?.copy_from_slice(x.data());
        Ok(())
    })
}

/// One-level 2D DWT of a row-major `rows x cols` image into four
/// `(rows/2) x (cols/2)` bands.
///
/// # Safety
/// Buffers must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn wc_dwt2d(
    w: *const WcWavelet,
    x: *const f64,
    rows: usize,
    cols: usize,
    boundary: WcBoundary,
    ll: *mut f64,
    lh: *mut f64,
    hl: *mut f64,
    hh: *mut f64,
) -> WcStatus {
    guard(|| {
        let w = w.as_ref().ok_or_else(|| null("w"))?;
        let img = tensor(&[rows, cols], input(x, rows * cols, "x")?)?;
        let b = transforms::dwt2d(&img, &w.spec, boundary.into()).or_status()?;
        let n = (rows / 2) * (cols / 2);
        for (dst, src, name) in [(ll, &b.ll, "ll"), (lh, &b.lh, "lh"), (hl, &b.hl, "hl"), (hh, &b.hh, "hh")] {
            output(dst, n, name)?.copy_from_slice(src.data());
        }
        Ok(())
    })
}

/// Inverse of [`wc_dwt2d`] into a `rows x cols` image.
///
/// # Safety
/// Buffers must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn wc_idwt2d(
    w: *const WcWavelet,
    ll: *const f64,
    lh: *const f64,
    hl: *const f64,
    hh: *const f64,
    rows: usize,
    cols: usize,
    boundary: WcBoundary,
    out: *mut f64,
) -> WcStatus {
    guard(|| {
        let w = w.as_ref().ok_or_else(|| null("w"))?;
        let (m, n) = (rows / 2, cols / 2);
        if m == 0 || n == 0 {
            return Err((WcStatus::InvalidExtent, format!("image {rows}x{cols} has empty bands")));
        }
        let band = |p: *const f64, name: &str| tensor(&[m, n], input(p, m * n, name)?);
        let bands = Bands2d { ll: band(ll, "ll")?, lh: band(lh, "lh")?, hl: band(hl, "hl")?, hh: band(hh, "hh")? };
        let x = transforms::idwt2d(&bands, &w.spec, boundary.into(), (rows, cols)).or_status()?;
        output(out, rows * cols, "out")?.copy_from_slice(x.data());
        Ok(())
    })
}

/// Low-frequency band only, for a `[batch, channels, rows, cols]` tensor;
/// `out` holds `batch * channels * (rows/2) * (cols/2)` doubles.
///
/// # Safety
/// Buffers must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn wc_dwt_ll(
    w: *const WcWavelet,
    x: *const f64,
    batch: usize,
    channels: usize,
    rows: usize,
    cols: usize,
    boundary: WcBoundary,
    out: *mut f64,
) -> WcStatus {
    guard(|| {
        let w = w.as_ref().ok_or_else(|| null("w"))?;
        let len = batch * channels * rows * cols;
        let t = tensor(&[batch, channels, rows, cols], input(x, len, "x")?)?;
        let y = transforms::dwt_ll(&t, &w.spec, boundary.into()).or_status()?;
        output(out, y.len(), "out")?.copy_from_slice(y.data());
        Ok(())
    })
}

/// Multiply-add counts of one `m x n x c` 2D DWT and IDWT.
///
/// # Safety
/// `dwt` and `idwt` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wc_madd(m: u64, n: u64, c: u64, dwt: *mut u64, idwt: *mut u64) -> WcStatus {
    guard(|| {
        if dwt.is_null() || idwt.is_null() {
            return Err(null("dwt/idwt"));
        }
        *dwt = transforms::madd_dwt2d(m, n, c).or_status()?;
        *idwt = transforms::madd_idwt2d(m, n, c).or_status()?;
        Ok(())
    })
}

/// Loads a model saved by `wavecnet train` (weights plus `<path>.json`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_model_load(path: *const c_char, out: *mut *mut WcModel) -> WcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = Model::load(cstr(path, "path")?).or_status()?;
        *out = Box::into_raw(Box::new(WcModel { model }));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`wc_model_load`] and not be used afterwards; null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn wc_model_free(m: *mut WcModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Writes the model's expected input `channels`, `rows`, `cols` and its
/// number of `classes`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wc_model_shape(
    m: *const WcModel,
    channels: *mut usize,
    rows: *mut usize,
    cols: *mut usize,
    classes: *mut usize,
) -> WcStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("m"))?;
        if channels.is_null() || rows.is_null() || cols.is_null() || classes.is_null() {
            return Err(null("shape outputs"));
        }
        let cfg = m.model.config();
        (*channels, *rows, *cols) = cfg.input;
        *classes = cfg.classes;
        Ok(())
    })
}

/// Class probabilities for `batch` images laid out `[batch, C, H, W]`;
/// `probs` holds `batch * classes` doubles.
///
/// # Safety
/// Buffers must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn wc_model_predict(m: *const WcModel, x: *const f64, batch: usize, probs: *mut f64) -> WcStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("m"))?;
        let (c, h, w) = m.model.config().input;
        let t = tensor(&[batch, c, h, w], input(x, batch * c * h * w, "x")?)?;
        let p = m.model.predict_proba(&t).or_status()?;
        output(probs, p.len(), "probs")?.copy_from_slice(p.data());
        Ok(())
    })
}
