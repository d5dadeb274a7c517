//! C ABI for the kreach verifier.
//!
//! Exposes problem loading and verification through opaque handles and
//! integer status codes so other languages can bind without knowing any
//! Rust types.  The matching header lives in `include/kreach.h` and is
//! regenerated by the build script.
//!
//! Conventions:
//! * every fallible call returns a `KREACH_*` code; `0` means success,
//! * on failure, [`kreach_last_error_message`] returns a thread-local
//!   description of what went wrong,
//! * every `*_free` function tolerates null,
//! * handles are plain heap pointers: pass a handle to at most one free
//!   call, never use it afterwards.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::{c_char, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};

use kreach::verifier::{self, Status, Strategy, Verdict, VerifyOptions};

/// The call completed.  Note that a completed verification reports
/// `KREACH_OK` for both safe and unsafe verdicts; code 1 is deliberately
/// unused so these codes line up with the CLI's exit codes, where 1 means
/// "verified unsafe".
pub const KREACH_OK: c_int = 0;
/// Bad input: unreadable or malformed file, unknown strategy name,
/// inconsistent problem dimensions.
pub const KREACH_ERR_USAGE: c_int = 2;
/// Numerical failure: error control could not certify the requested
/// accuracy, or counter-example validation failed.
pub const KREACH_ERR_NUMERICAL: c_int = 3;
/// A required pointer argument was null.
pub const KREACH_ERR_NULL: c_int = 4;
/// A string argument was not valid UTF-8.
pub const KREACH_ERR_UTF8: c_int = 5;
/// The library panicked internally; the handles involved are unchanged
/// but the failure is a bug worth reporting.
pub const KREACH_ERR_PANIC: c_int = 6;

/// Opaque handle to a loaded verification problem.
pub struct KreachProblem {
    inner: kreach::model::VerificationProblem,
}

/// Opaque handle to the outcome of a verification run.
pub struct KreachVerdict {
    inner: Verdict,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(code: c_int, message: impl Into<String>) -> c_int {
    let text = CString::new(message.into())
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
    code
}

fn fail_from(err: &kreach::Error) -> c_int {
    let code = if err.is_usage() { KREACH_ERR_USAGE } else { KREACH_ERR_NUMERICAL };
    fail(code, err.to_string())
}

/// Run an FFI body, converting panics into `KREACH_ERR_PANIC` instead of
/// unwinding across the C boundary.
fn guarded(body: impl FnOnce() -> c_int) -> c_int {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(KREACH_ERR_PANIC, format!("internal panic: {detail}"))
        }
    }
}

/// Message for the most recent failing kreach_* call on this thread, or
/// null when no call has failed yet.  The pointer stays valid until the
/// next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn kreach_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Load a verification problem from a JSON description (the format the
/// CLI's `gen` command writes).  On success stores a fresh handle in
/// `out`; release it with [`kreach_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn kreach_problem_load(
    path: *const c_char,
    out: *mut *mut KreachProblem,
) -> c_int {
    guarded(|| {
        if path.is_null() || out.is_null() {
            return fail(KREACH_ERR_NULL, "kreach_problem_load: null argument");
        }
        let path = match CStr::from_ptr(path).to_str() {
            Ok(s) => s,
            Err(_) => return fail(KREACH_ERR_UTF8, "path is not valid UTF-8"),
        };
        match kreach::model::load_problem(path) {
            Ok(problem) => {
                *out = Box::into_raw(Box::new(KreachProblem { inner: problem }));
                KREACH_OK
            }
            Err(err) => fail_from(&err),
        }
    })
}

/// Release a problem handle (null is ignored).
#[no_mangle]
pub unsafe extern "C" fn kreach_problem_free(problem: *mut KreachProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of states, or 0 when `problem` is null.
#[no_mangle]
pub unsafe extern "C" fn kreach_problem_states(problem: *const KreachProblem) -> u64 {
    problem.as_ref().map_or(0, |p| p.inner.n() as u64)
}

/// Dimension of the initial space (columns of E), or 0 when null.
#[no_mangle]
pub unsafe extern "C" fn kreach_problem_init_dim(problem: *const KreachProblem) -> u64 {
    problem.as_ref().map_or(0, |p| p.inner.init_dim() as u64)
}

/// Number of outputs (rows of C), or 0 when null.
#[no_mangle]
pub unsafe extern "C" fn kreach_problem_outputs(problem: *const KreachProblem) -> u64 {
    problem.as_ref().map_or(0, |p| p.inner.output_dim() as u64)
}

/// Number of time steps covering the horizon, or 0 when null.
#[no_mangle]
pub unsafe extern "C" fn kreach_problem_steps(problem: *const KreachProblem) -> u64 {
    problem.as_ref().map_or(0, |p| p.inner.n_steps() as u64)
}

fn parse_strategy(name: &str) -> Result<Option<Strategy>, c_int> {
    match name {
        "" | "auto" => Ok(None),
        "dense" => Ok(Some(Strategy::DenseExpm)),
        "rk45" => Ok(Some(Strategy::Rk45)),
        "arnoldi" => Ok(Some(Strategy::KrylovArnoldi)),
        "lanczos" => Ok(Some(Strategy::KrylovLanczos)),
        other => Err(fail(
            KREACH_ERR_USAGE,
            format!("unknown strategy {other:?}; use auto, dense, rk45, arnoldi, or lanczos"),
        )),
    }
}

/// Verify the problem over its full time horizon.
///
/// `strategy` selects the simulation backend: `"auto"` (or null) picks
/// from size and symmetry, the other accepted names are `"dense"`,
/// `"rk45"`, `"arnoldi"`, and `"lanczos"`.  `epsilon` is the certified
/// trajectory-error budget for the Krylov backends; pass 0 or a negative
/// value for the default (1e-8).
///
/// A completed run returns `KREACH_OK` whether the system is safe or not;
/// inspect the verdict handle stored in `out` and release it with
/// [`kreach_verdict_free`].  Verification only reads the problem, so
/// concurrent calls on one problem handle from several threads are fine.
#[no_mangle]
pub unsafe extern "C" fn kreach_verify(
    problem: *const KreachProblem,
    strategy: *const c_char,
    epsilon: f64,
    out: *mut *mut KreachVerdict,
) -> c_int {
    guarded(|| {
        let Some(problem) = problem.as_ref() else {
            return fail(KREACH_ERR_NULL, "kreach_verify: null problem");
        };
        if out.is_null() {
            return fail(KREACH_ERR_NULL, "kreach_verify: null output pointer");
        }
        let strategy = if strategy.is_null() {
            None
        } else {
            let name = match CStr::from_ptr(strategy).to_str() {
                Ok(s) => s,
                Err(_) => return fail(KREACH_ERR_UTF8, "strategy is not valid UTF-8"),
            };
            match parse_strategy(name) {
                Ok(choice) => choice,
                Err(code) => return code,
            }
        };
        let mut options = VerifyOptions { strategy, ..VerifyOptions::default() };
        if epsilon.is_finite() && epsilon > 0.0 {
            options.epsilon = epsilon;
        }
        match verifier::verify(&problem.inner, &options) {
            Ok(verdict) => {
                *out = Box::into_raw(Box::new(KreachVerdict { inner: verdict }));
                KREACH_OK
            }
            Err(err) => fail_from(&err),
        }
    })
}

/// Release a verdict handle (null is ignored).
#[no_mangle]
pub unsafe extern "C" fn kreach_verdict_free(verdict: *mut KreachVerdict) {
    if !verdict.is_null() {
        drop(Box::from_raw(verdict));
    }
}

/// 1 when the system is safe, 0 when unsafe, -1 when `verdict` is null.
#[no_mangle]
pub unsafe extern "C" fn kreach_verdict_is_safe(verdict: *const KreachVerdict) -> c_int {
    verdict
        .as_ref()
        .map_or(-1, |v| if v.inner.status == Status::Safe { 1 } else { 0 })
}

/// Index of the first step whose reachable outputs meet the unsafe set,
/// or -1 when safe or null.
#[no_mangle]
pub unsafe extern "C" fn kreach_verdict_step(verdict: *const KreachVerdict) -> i64 {
    verdict
        .as_ref()
        .and_then(|v| v.inner.step_index)
        .map_or(-1, |step| step as i64)
}

/// Time of the first unsafe step, or NaN when safe or null.
#[no_mangle]
pub unsafe extern "C" fn kreach_verdict_time(verdict: *const KreachVerdict) -> f64 {
    verdict.as_ref().and_then(|v| v.inner.time).unwrap_or(f64::NAN)
}

/// Relative error of the independent counter-example re-simulation, or
/// NaN when safe or null.
#[no_mangle]
pub unsafe extern "C" fn kreach_verdict_validation_error(verdict: *const KreachVerdict) -> f64 {
    verdict
        .as_ref()
        .and_then(|v| v.inner.validation_rel_error)
        .unwrap_or(f64::NAN)
}

/// Serialize the full verdict (status, witness point, certified error,
/// Krylov statistics, ...) as a JSON string.  Stores a NUL-terminated
/// string in `out`; release it with [`kreach_string_free`].
#[no_mangle]
pub unsafe extern "C" fn kreach_verdict_json(
    verdict: *const KreachVerdict,
    out: *mut *mut c_char,
) -> c_int {
    guarded(|| {
        let Some(verdict) = verdict.as_ref() else {
            return fail(KREACH_ERR_NULL, "kreach_verdict_json: null verdict");
        };
        if out.is_null() {
            return fail(KREACH_ERR_NULL, "kreach_verdict_json: null output pointer");
        }
        let text = match serde_json::to_string(&verdict.inner) {
            Ok(t) => t,
            Err(err) => return fail(KREACH_ERR_NUMERICAL, format!("serialization failed: {err}")),
        };
        match CString::new(text) {
            Ok(c) => {
                *out = c.into_raw();
                KREACH_OK
            }
            Err(_) => fail(KREACH_ERR_NUMERICAL, "serialized verdict contained a NUL byte"),
        }
    })
}

/// Release a string returned by this library (null is ignored).
#[no_mangle]
pub unsafe extern "C" fn kreach_string_free(string: *mut c_char) {
    if !string.is_null() {
        drop(CString::from_raw(string));
    }
}
