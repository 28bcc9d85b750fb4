//! C ABI over the `hchain` solvers.
//!
//! Models and solved profiles are opaque heap handles owned by the caller
//! and released with the matching `*_free` function. Every fallible call
//! returns an [`HcStatus`]; the message of the last failure on the calling
//! thread is available through [`hc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hchain::harness::{solve_profile_pipeline, HarnessError};
use hchain::model::{validate_with, ChainConfig, ChainParams, ForceSpec, Model, Requirements};
use hchain::pdmp::{estimate_periodic_averages, SimOptions};
use hchain::first_moments::current_report;
use hchain::Complex64;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidModel = 4,
    EngineFailure = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Validated chain model.
pub struct HcModel {
    model: Model,
}

/// Solved temperature profile with bond currents.
pub struct HcProfile {
    p2: Vec<f64>,
    bond_currents: Vec<f64>,
    j_n: f64,
}

/// Monte Carlo run length; `burn_in < 0` selects the automatic burn-in.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct HcSimOptions {
    pub replicas: usize,
    pub periods: usize,
    pub burn_in: i64,
    pub steps_per_period: usize,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: HcStatus, message: impl Into<String>) -> HcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

fn harness_status(e: HarnessError) -> HcStatus {
    let status = match &e {
        HarnessError::Model(_) => HcStatus::InvalidModel,
        HarnessError::Json(_) | HarnessError::Usage(_) | HarnessError::Io { .. } | HarnessError::Csv(_) => HcStatus::InvalidConfig,
        HarnessError::Engine(_) => HcStatus::EngineFailure,
    };
    fail(status, e.to_string())
}

fn guarded(f: impl FnOnce() -> HcStatus) -> HcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(HcStatus::Panic, "panic inside hchain"),
    }
}

fn store<T>(out: *mut *mut T, value: T) {
    // SAFETY: callers check `out` for null before computing `value`.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Copies `src` into the caller buffer `dst[0..len]`.
///
/// # Safety
/// `dst` must be valid for `len` writes.
unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> HcStatus {
    if dst.is_null() {
        return fail(HcStatus::NullPointer, "output buffer is null");
    }
    if len < src.len() {
        return fail(HcStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len()));
    }
    // SAFETY: `dst` is valid for `len ≥ src.len()` writes by contract.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len()) };
    HcStatus::Ok
}

/// Builds a model from a JSON config (`n, gamma, omega0, t_minus, theta, a, b, force, l_max`).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_model_from_json(json: *const c_char, out: *mut *mut HcModel) -> HcStatus {
    guarded(|| {
        if json.is_null() || out.is_null() {
            return fail(HcStatus::NullPointer, "null argument");
        }
        // SAFETY: `json` is NUL-terminated by contract.
        let Ok(text) = unsafe { CStr::from_ptr(json) }.to_str() else {
            return fail(HcStatus::InvalidUtf8, "config is not UTF-8");
        };
        let cfg = match ChainConfig::from_json(text) {
            Ok(c) => c,
            Err(e) => return fail(HcStatus::InvalidConfig, e.to_string()),
        };
        match cfg.build(Requirements::default()) {
            Ok(model) => {
                store(out, HcModel { model });
                HcStatus::Ok
            }
            Err(e) => fail(HcStatus::InvalidModel, e.to_string()),
        }
    })
}

/// Builds a model from parameters and `len` force coefficients `(ells[k], re[k] + i im[k])`.
///
/// # Safety
/// `ells`, `re`, `im` must be valid for `len` reads (may be null when `len = 0`); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_model_new(
    n: usize,
    gamma: f64,
    omega0: f64,
    t_minus: f64,
    theta: f64,
    a: f64,
    b: f64,
    ells: *const i64,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut HcModel,
) -> HcStatus {
    guarded(|| {
        if out.is_null() || (len > 0 && (ells.is_null() || re.is_null() || im.is_null())) {
            return fail(HcStatus::NullPointer, "null argument");
        }
        let coeffs: Vec<(i64, Complex64)> = if len == 0 {
            Vec::new()
        } else {
            // SAFETY: the three arrays hold `len` elements by contract.
            let (l, r, i) = unsafe { (slice::from_raw_parts(ells, len), slice::from_raw_parts(re, len), slice::from_raw_parts(im, len)) };
            l.iter().zip(r).zip(i).map(|((&l, &r), &i)| (l, Complex64::new(r, i))).collect()
        };
        let params = ChainParams { n, gamma, omega0, t_minus, theta, a, b };
        match validate_with(params, ForceSpec::from_pairs(coeffs), hchain::model::DEFAULT_L_MAX, Requirements::default()) {
            Ok(model) => {
                store(out, HcModel { model });
                HcStatus::Ok
            }
            Err(e) => fail(HcStatus::InvalidModel, e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be null or a handle from `hc_model_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hc_model_free(model: *mut HcModel) {
    if !model.is_null() {
        // SAFETY: the handle was created by `Box::into_raw`.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of sites `n + 1`; zero for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hc_model_sites(model: *const HcModel) -> usize {
    // SAFETY: live handle or null by contract.
    unsafe { model.as_ref() }.map_or(0, |m| m.model.params().sites())
}

/// Time-averaged current `J_n` and, in the scaling regime, its limit `J` (NaN otherwise).
///
/// # Safety
/// `model` must be a live handle; `j_n` and `j_limit` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_current(model: *const HcModel, j_n: *mut f64, j_limit: *mut f64) -> HcStatus {
    guarded(|| {
        // SAFETY: live handle or null by contract.
        let Some(m) = (unsafe { model.as_ref() }) else {
            return fail(HcStatus::NullPointer, "null model");
        };
        if j_n.is_null() || j_limit.is_null() {
            return fail(HcStatus::NullPointer, "null output");
        }
        match current_report(&m.model) {
            Ok(r) => {
                // SAFETY: both outputs are writable by contract.
                unsafe {
                    *j_n = r.j_n;
                    *j_limit = r.j_limit.unwrap_or(f64::NAN);
                }
                HcStatus::Ok
            }
            Err(e) => fail(HcStatus::EngineFailure, e.to_string()),
        }
    })
}

/// Solves the temperature profile and every bond current.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_profile_solve(model: *const HcModel, out: *mut *mut HcProfile) -> HcStatus {
    guarded(|| {
        // SAFETY: live handle or null by contract.
        let Some(m) = (unsafe { model.as_ref() }) else {
            return fail(HcStatus::NullPointer, "null model");
        };
        if out.is_null() {
            return fail(HcStatus::NullPointer, "null output");
        }
        match solve_profile_pipeline(m.model.clone()) {
            Ok(sol) => {
                let cov = sol.covariance;
                store(out, HcProfile { p2: cov.profile, bond_currents: cov.bond_currents, j_n: sol.j_n });
                HcStatus::Ok
            }
            Err(e) => harness_status(e),
        }
    })
}

/// # Safety
/// `profile` must be null or a handle from `hc_profile_solve` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hc_profile_free(profile: *mut HcProfile) {
    if !profile.is_null() {
        // SAFETY: the handle was created by `Box::into_raw`.
        drop(unsafe { Box::from_raw(profile) });
    }
}

/// Copies `⟨p_x²⟩`, `x = 0..=n`, into `buf` (at least `n + 1` values).
///
/// # Safety
/// `profile` must be a live handle; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hc_profile_p2(profile: *const HcProfile, buf: *mut f64, len: usize) -> HcStatus {
    // SAFETY: live handle or null by contract.
    match unsafe { profile.as_ref() } {
        // SAFETY: forwarded buffer contract.
        Some(p) => unsafe { copy_out(&p.p2, buf, len) },
        None => fail(HcStatus::NullPointer, "null profile"),
    }
}

/// Copies the currents through bonds `(x, x+1)`, `x = -1..=n`, into `buf` (at least `n + 2` values).
///
/// # Safety
/// `profile` must be a live handle; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hc_profile_bond_currents(profile: *const HcProfile, buf: *mut f64, len: usize) -> HcStatus {
    // SAFETY: live handle or null by contract.
    match unsafe { profile.as_ref() } {
        // SAFETY: forwarded buffer contract.
        Some(p) => unsafe { copy_out(&p.bond_currents, buf, len) },
        None => fail(HcStatus::NullPointer, "null profile"),
    }
}

/// `J_n` of a solved profile; NaN for a null handle.
///
/// # Safety
/// `profile` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hc_profile_current(profile: *const HcProfile) -> f64 {
    // SAFETY: live handle or null by contract.
    unsafe { profile.as_ref() }.map_or(f64::NAN, |p| p.j_n)
}

/// Monte Carlo estimate of `⟨p_x²⟩`: means and standard errors, `n + 1` values each.
///
/// # Safety
/// `model` must be a live handle, `opts` readable, `mean` and `stderr` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hc_simulate_p2(
    model: *const HcModel,
    opts: *const HcSimOptions,
    mean: *mut f64,
    stderr: *mut f64,
    len: usize,
) -> HcStatus {
    guarded(|| {
        // SAFETY: live handle / readable options or null by contract.
        let (Some(m), Some(o)) = (unsafe { model.as_ref() }, unsafe { opts.as_ref() }) else {
            return fail(HcStatus::NullPointer, "null argument");
        };
        let options = SimOptions {
            replicas: o.replicas,
            burn_in: usize::try_from(o.burn_in).ok(),
            periods: o.periods,
            steps_per_period: o.steps_per_period,
            seed: o.seed,
        };
        let est = match estimate_periodic_averages(&m.model, options) {
            Ok(e) => e,
            Err(e) => return harness_status(e.into()),
        };
        let means: Vec<f64> = est.p2_profile.iter().map(|e| e.mean).collect();
        let errs: Vec<f64> = est.p2_profile.iter().map(|e| e.stderr).collect();
        // SAFETY: forwarded buffer contract.
        match unsafe { copy_out(&means, mean, len) } {
            HcStatus::Ok => unsafe { copy_out(&errs, stderr, len) },
            s => s,
        }
    })
}

/// Copies the last error message of the calling thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns its full length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` is valid for `len > n` writes.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn hc_status_str(status: HcStatus) -> *const c_char {
    let s: &'static CStr = match status {
        HcStatus::Ok => c"ok",
        HcStatus::NullPointer => c"null pointer",
        HcStatus::InvalidUtf8 => c"invalid UTF-8",
        HcStatus::InvalidConfig => c"invalid config",
        HcStatus::InvalidModel => c"invalid model",
        HcStatus::EngineFailure => c"engine failure",
        HcStatus::BufferTooSmall => c"buffer too small",
        HcStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}
