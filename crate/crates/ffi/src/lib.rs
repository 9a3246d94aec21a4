//! C interface to the rtgrowth engine.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every fallible call returns an [`RtStatus`]; on
//! failure [`rt_last_error_message`] describes the error for the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rtgrowth::growth::{solve_growth_rate, GrowthResult, Verdict};
use rtgrowth::spectrum::ModeLattice;
use rtgrowth::{thresholds, Error, RTParameters};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidParameters = 4,
    SolverError = 5,
    /// the requested value does not exist (e.g. growth rate of a stable result)
    NotAvailable = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtVerdict {
    Unstable = 0,
    Stable = 1,
    Neutral = 2,
}

impl From<Verdict> for RtVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Unstable => RtVerdict::Unstable,
            Verdict::Stable => RtVerdict::Stable,
            Verdict::Neutral => RtVerdict::Neutral,
        }
    }
}

/// Validated physical parameters.
pub struct RtParams(RTParameters);

/// Result of a growth-rate solve.
pub struct RtGrowth(GrowthResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> RtStatus {
    match e {
        Error::RtConditionViolated { .. }
        | Error::NonPositiveParameter(_)
        | Error::NegativeCoefficient(_)
        | Error::DegreeTooLow(_)
        | Error::InvalidArgument(_)
        | Error::ZeroPermeability => RtStatus::InvalidParameters,
        _ => RtStatus::SolverError,
    }
}

fn guard<F: FnOnce() -> Result<(), (RtStatus, String)>>(f: F) -> RtStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RtStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            RtStatus::Panic
        }
    }
}

fn engine(e: Error) -> (RtStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RtStatus, String) {
    (RtStatus::NullPointer, format!("`{what}` is null"))
}

/// Parse parameters from a JSON object with every field of the parameter set.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rt_params_from_json(json: *const c_char, out: *mut *mut RtParams) -> RtStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (RtStatus::InvalidUtf8, e.to_string()))?;
        let p: RTParameters = serde_json::from_str(text).map_err(|e| (RtStatus::InvalidJson, e.to_string()))?;
        let p = rtgrowth::validate_parameters(&p).map_err(engine)?;
        *out = Box::into_raw(Box::new(RtParams(p)));
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`rt_params_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rt_params_free(p: *mut RtParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Largest growth rate on the half disk `|k| <= k_max`.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rt_growth_solve(
    p: *const RtParams,
    degree: u32,
    k_max: u32,
    tol: f64,
    out: *mut *mut RtGrowth,
) -> RtStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = solve_growth_rate(&p.0, &ModeLattice::new(k_max), degree as usize, tol).map_err(engine)?;
        *out = Box::into_raw(Box::new(RtGrowth(r)));
        Ok(())
    })
}

/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rt_growth_verdict(g: *const RtGrowth, out: *mut RtVerdict) -> RtStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("growth"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = g.0.verdict.into();
        Ok(())
    })
}

/// Growth rate; `NotAvailable` for a stable result.
///
/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rt_growth_lambda(g: *const RtGrowth, out: *mut f64) -> RtStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("growth"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = g.0.lambda.ok_or((RtStatus::NotAvailable, "stable configuration".into()))?;
        Ok(())
    })
}

/// Lattice indices of the critical wavevector.
///
/// # Safety
/// `g` must be a live handle; `k1`, `k2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rt_growth_wavevector(g: *const RtGrowth, k1: *mut i64, k2: *mut i64) -> RtStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("growth"))?;
        let (k1, k2) = (k1.as_mut().ok_or_else(|| null("k1"))?, k2.as_mut().ok_or_else(|| null("k2"))?);
        let w = g
            .0
            .critical_wavevector
            .ok_or((RtStatus::NotAvailable, "stable configuration".into()))?;
        (*k1, *k2) = (w.k1, w.k2);
        Ok(())
    })
}

/// # Safety
/// `g` must come from [`rt_growth_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rt_growth_free(g: *mut RtGrowth) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Stability discriminant; `out_dis` is `INFINITY` when unbounded.
///
/// # Safety
/// `p` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn rt_discriminant(
    p: *const RtParams,
    degree: u32,
    k_max: u32,
    out_dis: *mut f64,
    out_verdict: *mut RtVerdict,
) -> RtStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("params"))?;
        let d = out_dis.as_mut().ok_or_else(|| null("out_dis"))?;
        let v = out_verdict.as_mut().ok_or_else(|| null("out_verdict"))?;
        let r = thresholds::discriminant(&p.0, &ModeLattice::new(k_max), degree as usize).map_err(engine)?;
        *d = r.dis();
        *v = r.verdict.into();
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rt_poincare_constant(l: f64, tau: f64, out: *mut f64) -> RtStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = thresholds::poincare_constant(l, tau).map_err(engine)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rt_surface_tension_threshold(g: f64, rho_jump: f64, l1: f64, l2: f64, out: *mut f64) -> RtStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = thresholds::surface_tension_threshold(g, rho_jump, l1, l2).map_err(engine)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rt_vertical_field_threshold(
    g: f64,
    rho_jump: f64,
    lambda: f64,
    l: f64,
    tau: f64,
    out: *mut f64,
) -> RtStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = thresholds::vertical_field_threshold(g, rho_jump, lambda, l, tau).map_err(engine)?;
        Ok(())
    })
}

/// Smallest `1 <= n <= big_n` with `|n alpha - m| < 1/big_n`.
///
/// # Safety
/// `out_n`, `out_m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rt_dirichlet_approximation(alpha: f64, big_n: u64, out_n: *mut u64, out_m: *mut i64) -> RtStatus {
    guard(|| {
        let n = out_n.as_mut().ok_or_else(|| null("out_n"))?;
        let m = out_m.as_mut().ok_or_else(|| null("out_m"))?;
        if !alpha.is_finite() || big_n == 0 {
            return Err((RtStatus::InvalidParameters, "alpha must be finite and N >= 1".into()));
        }
        (*n, *m) = thresholds::dirichlet_approximation(alpha, big_n);
        Ok(())
    })
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn rt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Engine version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rt_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
