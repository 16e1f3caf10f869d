//! C ABI over isac-core.
//!
//! Every entry point returns an [`IsacStatus`]; on anything but `Ok` the
//! thread's last error message is set and can be read with
//! [`isac_last_error_message`]. Objects cross the boundary as opaque handles
//! that the caller releases with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use isac_core::channel::{draw_channels, Channels};
use isac_core::driver::{ao_solve, AoResult, UaChoice};
use isac_core::error::IsacError;
use isac_core::llm::{llm_optimize_ua, LlmLimits, StubBackend};
use isac_core::metrics::UAMatrix;
use isac_core::scene::{generate_scenario, Scenario, SystemConfig};
use isac_core::ua::{brute_force_ua, coalition_refine, gale_shapley_ua, ua_objective, RateTable};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsacStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad configuration, dimension or solver choice.
    InvalidArgument = 3,
    /// The solver or scenario generator failed.
    SolveFailed = 4,
    /// Caller buffer shorter than the data.
    BufferTooSmall = 5,
    Panic = 6,
}

/// UA strategies reachable without a network backend.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsacUaSolver {
    Brute = 0,
    /// Gale-Shapley matching, frozen after the first AO iteration.
    GaleShapley = 1,
    Coalition = 2,
    /// Deterministic offline stand-in for the chat-model pipeline.
    Stub = 3,
}

impl IsacUaSolver {
    /// Checked conversion from the integer a C caller passes.
    fn from_raw(v: u32) -> Result<Self, (IsacStatus, String)> {
        match v {
            0 => Ok(IsacUaSolver::Brute),
            1 => Ok(IsacUaSolver::GaleShapley),
            2 => Ok(IsacUaSolver::Coalition),
            3 => Ok(IsacUaSolver::Stub),
            _ => Err((IsacStatus::InvalidArgument, format!("unknown UA solver id {v}"))),
        }
    }
}

impl From<IsacUaSolver> for UaChoice {
    fn from(s: IsacUaSolver) -> Self {
        match s {
            IsacUaSolver::Brute => UaChoice::Brute,
            IsacUaSolver::GaleShapley => UaChoice::GaleShapley,
            IsacUaSolver::Coalition => UaChoice::Coalition,
            IsacUaSolver::Stub => UaChoice::Stub,
        }
    }
}

/// A drawn network: configuration, geometry and channels.
pub struct IsacProblem {
    cfg: SystemConfig,
    scn: Scenario,
    ch: Channels,
}

pub struct IsacAoResult {
    inner: AoResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    // Interior NULs cannot cross as a C string.
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &IsacError) -> IsacStatus {
    match err {
        IsacError::Config(_) | IsacError::Dimension(_) | IsacError::InvalidAssociation(_) | IsacError::Json(_) => {
            IsacStatus::InvalidArgument
        }
        _ => IsacStatus::SolveFailed,
    }
}

/// Runs `f` with panics and errors turned into a status code.
fn guarded(f: impl FnOnce() -> Result<(), (IsacStatus, String)>) -> IsacStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IsacStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside isac-core");
            IsacStatus::Panic
        }
    }
}

fn core_err(e: IsacError) -> (IsacStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (IsacStatus, String) {
    (IsacStatus::NullPointer, format!("`{what}` is NULL"))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next `isac_*` call on the same thread.
#[no_mangle]
pub extern "C" fn isac_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Draws a network from a JSON configuration (NULL for defaults) and `seed`.
///
/// # Safety
/// `config_json` is NULL or a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_problem_new(
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut IsacProblem,
) -> IsacStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = if config_json.is_null() {
            SystemConfig::default()
        } else {
            let text = CStr::from_ptr(config_json)
                .to_str()
                .map_err(|e| (IsacStatus::InvalidUtf8, format!("config is not UTF-8: {e}")))?;
            SystemConfig::from_json_str(text).map_err(core_err)?
        };
        cfg.validate().map_err(core_err)?;
        let scn = generate_scenario(&cfg, seed).map_err(core_err)?;
        let ch = draw_channels(&scn, &cfg, seed);
        *out = Box::into_raw(Box::new(IsacProblem { cfg, scn, ch }));
        Ok(())
    })
}

/// Any output pointer may be NULL to skip it.
///
/// # Safety
/// `p` comes from [`isac_problem_new`] and is not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isac_problem_dims(
    p: *const IsacProblem,
    k: *mut usize,
    n: *mut usize,
    m: *mut usize,
) -> IsacStatus {
    guarded(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        for (dst, v) in [(k, p.cfg.k), (n, p.cfg.n), (m, p.cfg.m)] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `p` is NULL or comes from [`isac_problem_new`] and is not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isac_problem_free(p: *mut IsacProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Alternating optimization of association and beamformers. `solver` is an
/// [`IsacUaSolver`] value.
///
/// # Safety
/// `p` is a live problem handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_ao_solve(p: *const IsacProblem, solver: u32, out: *mut *mut IsacAoResult) -> IsacStatus {
    guarded(|| {
        let solver = IsacUaSolver::from_raw(solver)?;
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = ao_solve(&p.scn, &p.ch, &p.cfg, solver.into(), None).map_err(core_err)?;
        *out = Box::into_raw(Box::new(IsacAoResult { inner }));
        Ok(())
    })
}

/// Final sum rate and whether every BS passed the constraint audit.
///
/// # Safety
/// `r` is a live result handle; the outputs are valid pointers.
#[no_mangle]
pub unsafe extern "C" fn isac_result_summary(
    r: *const IsacAoResult,
    sum_rate: *mut f64,
    audit_passes: *mut bool,
    iterations: *mut usize,
) -> IsacStatus {
    guarded(|| {
        let r = &r.as_ref().ok_or_else(|| null("r"))?.inner;
        if sum_rate.is_null() || audit_passes.is_null() || iterations.is_null() {
            return Err(null("summary output"));
        }
        *sum_rate = r.objective();
        *audit_passes = r.audit_passes();
        *iterations = r.iterations;
        Ok(())
    })
}

unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, cap: usize, len: *mut usize) -> Result<(), (IsacStatus, String)> {
    if len.is_null() {
        return Err(null("len"));
    }
    *len = src.len();
    if cap < src.len() {
        return Err((IsacStatus::BufferTooSmall, format!("need {} entries, buffer holds {cap}", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(null("buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Writes the 0-based serving BS of each CU. `len` always receives N, so a
/// call with `cap = 0` queries the size (and returns `BufferTooSmall`).
///
/// # Safety
/// `r` is a live result handle; `buf` holds `cap` writable entries.
#[no_mangle]
pub unsafe extern "C" fn isac_result_assignment(
    r: *const IsacAoResult,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> IsacStatus {
    guarded(|| {
        let r = &r.as_ref().ok_or_else(|| null("r"))?.inner;
        copy_out(r.u_final.assignment(), buf, cap, len)
    })
}

/// Sum rate after each outer iteration, same size protocol as
/// [`isac_result_assignment`].
///
/// # Safety
/// `r` is a live result handle; `buf` holds `cap` writable entries.
#[no_mangle]
pub unsafe extern "C" fn isac_result_trace(
    r: *const IsacAoResult,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> IsacStatus {
    guarded(|| {
        let r = &r.as_ref().ok_or_else(|| null("r"))?.inner;
        copy_out(&r.objective_trace, buf, cap, len)
    })
}

/// # Safety
/// `r` is NULL or comes from [`isac_ao_solve`] and is not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isac_result_free(r: *mut IsacAoResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Association alone on a row-major `k × n` SINR table (linear scale).
/// Writes `n` 0-based BS indices and the bandwidth-weighted sum rate.
/// `solver` is an [`IsacUaSolver`] value.
///
/// # Safety
/// `sinr` holds `k * n` readable values, `assignment` holds `n` writable
/// entries and `rate` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_ua_solve(
    sinr: *const f64,
    k: usize,
    n: usize,
    bandwidth: f64,
    solver: u32,
    assignment: *mut usize,
    rate: *mut f64,
) -> IsacStatus {
    guarded(|| {
        let solver = IsacUaSolver::from_raw(solver)?;
        if sinr.is_null() || assignment.is_null() || rate.is_null() {
            return Err(null("sinr, assignment or rate"));
        }
        let cells = k.checked_mul(n).ok_or_else(|| (IsacStatus::InvalidArgument, "k * n overflows".to_string()))?;
        if cells == 0 {
            return Err((IsacStatus::InvalidArgument, "empty SINR table".into()));
        }
        let flat = std::slice::from_raw_parts(sinr, cells);
        let t = RateTable::new(flat.chunks(n).map(<[f64]>::to_vec).collect()).map_err(core_err)?;
        let u: UAMatrix = match solver {
            IsacUaSolver::Brute => brute_force_ua(&t, bandwidth).map_err(core_err)?.0,
            IsacUaSolver::GaleShapley => gale_shapley_ua(&t).map_err(core_err)?,
            IsacUaSolver::Coalition => {
                coalition_refine(&gale_shapley_ua(&t).map_err(core_err)?, &t).map_err(core_err)?
            }
            IsacUaSolver::Stub => {
                llm_optimize_ua(&t, bandwidth, &StubBackend, LlmLimits::default())
                    .map_err(|e| core_err(IsacError::from(e)))?
                    .u
            }
        };
        *rate = ua_objective(&u, &t, bandwidth).map_err(core_err)?;
        ptr::copy_nonoverlapping(u.assignment().as_ptr(), assignment, n);
        Ok(())
    })
}
