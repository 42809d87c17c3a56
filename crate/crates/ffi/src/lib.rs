//! C ABI for running scenarios and reading their results.
//!
//! Every function returns a [`ChosimStatus`]; on anything but `Ok` the
//! thread's last error message is set and can be read with
//! [`chosim_last_error`]. Runs are opaque [`ChosimRun`] handles owned by the
//! caller and released with [`chosim_run_free`]. No function unwinds across
//! the boundary: panics become `CHOSIM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use chosim::campaign::{resolve_scenario, CampaignError};
use chosim::handover::HoOutcome;
use chosim::{RunArtifacts, SimError};

/// Result code of every exported function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChosimStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The scenario could not be read, parsed, or validated.
    Config = 3,
    /// A policy hook blocked an action and the run was aborted.
    Blocked = 4,
    /// The run failed for another reason.
    Run = 5,
    /// Writing artifacts failed.
    Io = 6,
    /// An index was out of range.
    OutOfRange = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

/// Opaque handle to a completed run.
pub struct ChosimRun {
    artifacts: RunArtifacts,
}

/// Headline counts of a completed run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChosimSummary {
    pub attempts: u64,
    pub successes: u64,
    pub fail_rlf: u64,
    pub fail_rach: u64,
    pub ping_pongs: u64,
    pub directives_applied: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: ChosimStatus, msg: impl Into<String>) -> ChosimStatus {
    set_error(msg);
    status
}

/// Runs `f` with unwinding contained.
fn guard(f: impl FnOnce() -> ChosimStatus) -> ChosimStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            fail(ChosimStatus::Panic, msg)
        }
    }
}

/// # Safety
/// `s` must be null or point to a NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, ChosimStatus> {
    if s.is_null() {
        return Err(fail(ChosimStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(ChosimStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn status_of_sim(e: &SimError) -> ChosimStatus {
    match e {
        SimError::Config(_) => ChosimStatus::Config,
        SimError::BlockedByPolicy { .. } => ChosimStatus::Blocked,
        _ => ChosimStatus::Run,
    }
}

fn run_inner(scenario: *const c_char, seed: Option<u64>, out: *mut *mut ChosimRun) -> ChosimStatus {
    if out.is_null() {
        return fail(ChosimStatus::NullArgument, "out is null");
    }
    // SAFETY: `out` is non-null and the caller guarantees it is writable.
    unsafe { *out = ptr::null_mut() };
    // SAFETY: the caller guarantees `scenario` is null or NUL-terminated.
    let spec = match unsafe { read_str(scenario, "scenario") } {
        Ok(s) => s,
        Err(st) => return st,
    };
    let mut cfg = match resolve_scenario(spec) {
        Ok(c) => c,
        Err(e @ CampaignError::Artifact(_)) | Err(e @ CampaignError::Pool(_)) => {
            return fail(ChosimStatus::Run, e.to_string())
        }
        Err(e) => return fail(ChosimStatus::Config, e.to_string()),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    match chosim::run(&cfg) {
        Ok(artifacts) => {
            // SAFETY: checked non-null above.
            unsafe { *out = Box::into_raw(Box::new(ChosimRun { artifacts })) };
            ChosimStatus::Ok
        }
        Err(e) => fail(status_of_sim(&e), e.to_string()),
    }
}

/// Runs a scenario with its own seed. `scenario` is a file path or
/// `builtin:<name>`. On success `*out` holds a new handle; otherwise it is
/// set to null.
///
/// # Safety
/// `scenario` must be null or a NUL-terminated string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn chosim_run(scenario: *const c_char, out: *mut *mut ChosimRun) -> ChosimStatus {
    guard(|| run_inner(scenario, None, out))
}

/// Like [`chosim_run`] with the scenario seed replaced by `seed`.
///
/// # Safety
/// Same as [`chosim_run`].
#[no_mangle]
pub unsafe extern "C" fn chosim_run_seeded(
    scenario: *const c_char,
    seed: u64,
    out: *mut *mut ChosimRun,
) -> ChosimStatus {
    guard(|| run_inner(scenario, Some(seed), out))
}

/// # Safety
/// `run` must be null or a handle from [`chosim_run`] not yet freed.
unsafe fn handle<'a>(run: *const ChosimRun) -> Result<&'a ChosimRun, ChosimStatus> {
    run.as_ref().ok_or_else(|| fail(ChosimStatus::NullArgument, "run is null"))
}

/// Copies the run's headline counts into `*out`.
///
/// # Safety
/// `run` must be a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn chosim_run_summary(run: *const ChosimRun, out: *mut ChosimSummary) -> ChosimStatus {
    guard(|| {
        let r = match handle(run) {
            Ok(r) => r,
            Err(s) => return s,
        };
        let Some(out) = out.as_mut() else {
            return fail(ChosimStatus::NullArgument, "out is null");
        };
        let a = &r.artifacts;
        let count = |o: HoOutcome| a.attempts.iter().filter(|h| h.outcome == o).count() as u64;
        *out = ChosimSummary {
            attempts: a.attempts.len() as u64,
            successes: count(HoOutcome::Success),
            fail_rlf: count(HoOutcome::FailRlf),
            fail_rach: count(HoOutcome::FailRach),
            ping_pongs: a.summary.ping_pongs,
            directives_applied: a.summary.directives_applied,
        };
        ChosimStatus::Ok
    })
}

/// Number of entries in the offset trace.
///
/// # Safety
/// `run` must be a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn chosim_run_offset_count(run: *const ChosimRun, out: *mut usize) -> ChosimStatus {
    guard(|| {
        let r = match handle(run) {
            Ok(r) => r,
            Err(s) => return s,
        };
        let Some(out) = out.as_mut() else {
            return fail(ChosimStatus::NullArgument, "out is null");
        };
        *out = r.artifacts.offset_trace.len();
        ChosimStatus::Ok
    })
}

/// Offset in dB after the `index`-th applied directive.
///
/// # Safety
/// `run` must be a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn chosim_run_offset_at(run: *const ChosimRun, index: usize, out: *mut f64) -> ChosimStatus {
    guard(|| {
        let r = match handle(run) {
            Ok(r) => r,
            Err(s) => return s,
        };
        let Some(out) = out.as_mut() else {
            return fail(ChosimStatus::NullArgument, "out is null");
        };
        match r.artifacts.offset_trace.get(index) {
            Some(e) => {
                *out = e.offset_db;
                ChosimStatus::Ok
            }
            None => fail(
                ChosimStatus::OutOfRange,
                format!("index {index} >= {}", r.artifacts.offset_trace.len()),
            ),
        }
    })
}

/// Writes the artifact bundle into directory `dir`, creating it if needed.
///
/// # Safety
/// `run` must be a live handle; `dir` must be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn chosim_run_write(run: *const ChosimRun, dir: *const c_char) -> ChosimStatus {
    guard(|| {
        let r = match handle(run) {
            Ok(r) => r,
            Err(s) => return s,
        };
        let dir = match read_str(dir, "dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        match chosim::artifacts::write_dir(&r.artifacts, Path::new(dir)) {
            Ok(()) => ChosimStatus::Ok,
            Err(e) => fail(ChosimStatus::Io, e.to_string()),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `run` must be null or a handle from [`chosim_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chosim_run_free(run: *mut ChosimRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn chosim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chosim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
