//! C ABI over `panel_deconv`.
//!
//! Objects are opaque handles created by `pd_*_new`-style functions and
//! released with the matching `pd_*_free`. Every fallible function returns a
//! [`PdStatus`]; on failure a message for the calling thread is available from
//! [`pd_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use panel_deconv::bandwidth::cv_select;
use panel_deconv::risk::{predicted_rate, MomentOrder, RateSpec, RateTarget};
use panel_deconv::{density_from_cf, sample_panel, CfCurve, Error, Estimator, FreqGrid, KernelKind, ModelSpec, PanelSample, SeedSpec};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Estimator = 4,
    TooFewObservations = 5,
    UnsupportedRateCase = 6,
    Parse = 7,
    Io = 8,
    Panic = 9,
}

pub const PD_ESTIMATOR_KOTLARSKI: i32 = 0;
pub const PD_ESTIMATOR_LI_VUONG: i32 = 1;
pub const PD_ESTIMATOR_RESIDUAL: i32 = 2;
pub const PD_ESTIMATOR_SYMMETRIC: i32 = 3;

pub const PD_KERNEL_SINC: i32 = 0;
pub const PD_KERNEL_GAUSSIAN: i32 = 1;

pub const PD_TARGET_LATENT: i32 = 0;
pub const PD_TARGET_ERROR: i32 = 1;

/// A panel of paired measurements.
pub struct PdPanel(PanelSample);

/// A characteristic function sampled on a symmetric frequency grid.
pub struct PdCurve(CfCurve);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).expect("nul bytes removed"));
}

fn status_of(err: &Error) -> PdStatus {
    match err {
        Error::Config(_) => PdStatus::Config,
        Error::Estimator(_) => PdStatus::Estimator,
        Error::TooFewObservations(_) => PdStatus::TooFewObservations,
        Error::UnsupportedRateCase(_) => PdStatus::UnsupportedRateCase,
        Error::Parse(_) => PdStatus::Parse,
        Error::Io(_) => PdStatus::Io,
    }
}

struct Fail(PdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(PdStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Fail {
    Fail(PdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PdStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

unsafe fn string<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

fn estimator(code: i32) -> Result<Estimator, Fail> {
    match code {
        PD_ESTIMATOR_KOTLARSKI => Ok(Estimator::Kotlarski),
        PD_ESTIMATOR_LI_VUONG => Ok(Estimator::LiVuong),
        PD_ESTIMATOR_RESIDUAL => Ok(Estimator::Residual),
        PD_ESTIMATOR_SYMMETRIC => Ok(Estimator::Symmetric),
        other => Err(invalid(format!("unknown estimator code {other}"))),
    }
}

fn kernel(code: i32) -> Result<KernelKind, Fail> {
    match code {
        PD_KERNEL_SINC => Ok(KernelKind::Sinc),
        PD_KERNEL_GAUSSIAN => Ok(KernelKind::Gaussian),
        other => Err(invalid(format!("unknown kernel code {other}"))),
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn pd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n` rows of paired measurements into a new panel.
///
/// # Safety
/// `y1` and `y2` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_panel_new(y1: *const f64, y2: *const f64, n: usize, out: *mut *mut PdPanel) -> PdStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let a = slice(y1, n, "y1")?.to_vec();
        let b = slice(y2, n, "y2")?.to_vec();
        *out = Box::into_raw(Box::new(PdPanel(PanelSample::new(a, b)?)));
        Ok(())
    })
}

/// Simulates `n` rows from two model literals such as `"gamma(4,2)"` and
/// `"bgamma(2,2,3,3)"`, on the random stream `(seed, rep)`.
///
/// # Safety
/// `model_x` and `model_eps` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_panel_simulate(
    model_x: *const c_char,
    model_eps: *const c_char,
    n: usize,
    seed: u64,
    rep: u64,
    out: *mut *mut PdPanel,
) -> PdStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let x: ModelSpec = string(model_x, "model_x")?.parse()?;
        let e: ModelSpec = string(model_eps, "model_eps")?.parse()?;
        let panel = sample_panel(&x, &e, n, SeedSpec::new(seed, rep))?;
        *out = Box::into_raw(Box::new(PdPanel(panel)));
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `panel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pd_panel_len(panel: *const PdPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.0.n())
}

/// # Safety
/// `panel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pd_panel_free(panel: *mut PdPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Runs an estimator on the grid `[-u_max, u_max]` with spacing `step`.
///
/// # Safety
/// `panel` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_estimate(
    panel: *const PdPanel,
    estimator_code: i32,
    u_max: f64,
    step: f64,
    out: *mut *mut PdCurve,
) -> PdStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let panel = panel.as_ref().ok_or_else(|| null("panel"))?;
        let grid = FreqGrid::new(u_max, step)?;
        let curve = estimator(estimator_code)?.estimate(&panel.0, &grid)?;
        *out = Box::into_raw(Box::new(PdCurve(curve)));
        Ok(())
    })
}

/// Number of grid points, or 0 for a null handle.
///
/// # Safety
/// `curve` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pd_curve_len(curve: *const PdCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.grid().len())
}

/// Copies the grid points and the real and imaginary parts into arrays of
/// length `len`, which must equal [`pd_curve_len`].
///
/// # Safety
/// `curve` must be a live handle; each output must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pd_curve_copy(curve: *const PdCurve, u: *mut f64, re: *mut f64, im: *mut f64, len: usize) -> PdStatus {
    guard(|| {
        let curve = &curve.as_ref().ok_or_else(|| null("curve"))?.0;
        if len != curve.grid().len() {
            return Err(invalid(format!("buffers hold {len} points, curve has {}", curve.grid().len())));
        }
        let (u, re, im) = (slice_mut(u, len, "u")?, slice_mut(re, len, "re")?, slice_mut(im, len, "im")?);
        for (i, (p, v)) in curve.grid().points().into_iter().zip(curve.values()).enumerate() {
            u[i] = p;
            re[i] = v.re;
            im[i] = v.im;
        }
        Ok(())
    })
}

/// # Safety
/// `curve` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pd_curve_free(curve: *mut PdCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Kernel density estimate at the uniform points `x[0..len]`, written to `out`.
///
/// # Safety
/// `curve` must be a live handle; `x` and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pd_density(
    curve: *const PdCurve,
    kernel_code: i32,
    h: f64,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> PdStatus {
    guard(|| {
        let curve = &curve.as_ref().ok_or_else(|| null("curve"))?.0;
        let xs = slice(x, len, "x")?;
        let out = slice_mut(out, len, "out")?;
        let density = density_from_cf(curve, kernel(kernel_code)?, h, xs)?;
        out.copy_from_slice(density.values());
        Ok(())
    })
}

/// Cross-validated bandwidth `h = 1/m`.
///
/// # Safety
/// `panel` must be a live handle; `m` and `h` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_cv_select(
    panel: *const PdPanel,
    kernel_code: i32,
    u_max: f64,
    step: f64,
    m: *mut usize,
    h: *mut f64,
) -> PdStatus {
    guard(|| {
        let panel = panel.as_ref().ok_or_else(|| null("panel"))?;
        let (m, h) = (out_ptr(m, "m")?, out_ptr(h, "h")?);
        let grid = FreqGrid::new(u_max, step)?;
        let sel = cv_select(&panel.0, &grid, kernel(kernel_code)?)?;
        *m = sel.m;
        *h = sel.h;
        Ok(())
    })
}

/// Convergence rate `n^{-poly} (log n)^{-log}` of the density estimator for
/// `target`. `p = 0` stands for infinitely many moments.
///
/// # Safety
/// `poly` and `log` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn pd_predicted_rate(
    target: i32,
    beta_x: f64,
    c_x: f64,
    rho_x: f64,
    beta_eps: f64,
    c_eps: f64,
    rho_eps: f64,
    p: u32,
    poly: *mut f64,
    log: *mut f64,
) -> PdStatus {
    guard(|| {
        let (poly, log) = (out_ptr(poly, "poly")?, out_ptr(log, "log")?);
        let target = match target {
            PD_TARGET_LATENT => RateTarget::Latent,
            PD_TARGET_ERROR => RateTarget::Error,
            other => return Err(invalid(format!("unknown target code {other}"))),
        };
        let p = if p == 0 { MomentOrder::Infinite } else { MomentOrder::Finite(p) };
        let x = RateSpec { beta: beta_x, c: c_x, rho: rho_x };
        let e = RateSpec { beta: beta_eps, c: c_eps, rho: rho_eps };
        let rate = predicted_rate(target, &x, &e, p)?;
        *poly = rate.poly;
        *log = rate.log.unwrap_or(0.0);
        Ok(())
    })
}
