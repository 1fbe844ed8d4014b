//! C ABI over the mock BIM environment and the task runner.
//!
//! Every fallible function returns a [`BpStatus`] code; on failure the
//! message is available from [`bp_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bimpilot::actions::{execute_script, parse_script, NoHooks};
use bimpilot::agent::{fault_for_rate, run_task, RunConfig, ScriptedBackend};
use bimpilot::bench::BenchmarkTask;
use bimpilot::env::{new_session, EnvState};
use bimpilot::geometry::CanvasGeometry;
use bimpilot::retrieval::DocIndex;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    BufferTooSmall = 5,
    TaskError = 6,
    Panic = 7,
}

/// Opaque environment session.
pub struct BpEnv {
    state: EnvState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: BpStatus, msg: impl Into<String>) -> BpStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> BpStatus) -> BpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(BpStatus::Panic, "internal panic"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, BpStatus> {
    if p.is_null() {
        return Err(fail(BpStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(BpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn valid_rate(rate: f64) -> Result<(), BpStatus> {
    if (0.0..=1.0).contains(&rate) {
        Ok(())
    } else {
        Err(fail(BpStatus::InvalidArgument, format!("fault rate {rate} is outside [0, 1]")))
    }
}

/// Copy `bytes` into `buf`. `written` always receives the full length, so a
/// call with a null or short buffer reports the size needed.
unsafe fn copy_out(bytes: &[u8], buf: *mut u8, len: usize, written: *mut usize) -> BpStatus {
    if !written.is_null() {
        *written = bytes.len();
    }
    if buf.is_null() || len < bytes.len() {
        return fail(BpStatus::BufferTooSmall, format!("buffer holds {len} bytes, {} needed", bytes.len()));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
    BpStatus::Ok
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn bp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Open a session on the default canvas with faults at `fault_rate`.
///
/// # Safety
/// `out` must be a valid pointer; the handle must be released with [`bp_env_free`].
#[no_mangle]
pub unsafe extern "C" fn bp_env_new(fault_rate: f64, seed: u64, out: *mut *mut BpEnv) -> BpStatus {
    guard(|| {
        if out.is_null() {
            return fail(BpStatus::NullArgument, "out is null");
        }
        if let Err(s) = valid_rate(fault_rate) {
            return s;
        }
        let state = new_session(CanvasGeometry::default(), fault_for_rate(fault_rate, seed));
        *out = Box::into_raw(Box::new(BpEnv { state }));
        BpStatus::Ok
    })
}

/// Release a session. Null is ignored.
///
/// # Safety
/// `env` must come from [`bp_env_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bp_env_free(env: *mut BpEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Parse and run an action script; `flag_count` (optional) receives the
/// number of anomaly flags raised.
///
/// # Safety
/// `env` must be a live handle and `script` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bp_env_execute(env: *mut BpEnv, script: *const c_char, flag_count: *mut u32) -> BpStatus {
    guard(|| {
        let Some(env) = env.as_mut() else {
            return fail(BpStatus::NullArgument, "env is null");
        };
        let text = match read_str(script, "script") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let parsed = match parse_script(text) {
            Ok(p) => p,
            Err(e) => return fail(BpStatus::ParseError, e.to_string()),
        };
        let trace = execute_script(&parsed, &mut env.state, &mut NoHooks);
        if !flag_count.is_null() {
            *flag_count = trace.flags().count() as u32;
        }
        BpStatus::Ok
    })
}

/// Width and height of rendered frames in pixels.
///
/// # Safety
/// `env` must be a live handle; `width` and `height` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bp_env_frame_size(env: *const BpEnv, width: *mut u32, height: *mut u32) -> BpStatus {
    guard(|| {
        let Some(env) = env.as_ref() else {
            return fail(BpStatus::NullArgument, "env is null");
        };
        if width.is_null() || height.is_null() {
            return fail(BpStatus::NullArgument, "width or height is null");
        }
        let f = env.state.render();
        *width = f.width;
        *height = f.height;
        BpStatus::Ok
    })
}

/// Render the current frame as packed RGB8, row-major.
///
/// # Safety
/// `env` must be a live handle; `buf` must hold `len` bytes; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn bp_env_render_rgb(
    env: *const BpEnv,
    buf: *mut u8,
    len: usize,
    written: *mut usize,
) -> BpStatus {
    guard(|| {
        let Some(env) = env.as_ref() else {
            return fail(BpStatus::NullArgument, "env is null");
        };
        copy_out(&env.state.render().raster.pixels, buf, len, written)
    })
}

/// Export the building document as canonical JSON bytes (not NUL-terminated).
///
/// # Safety
/// `env` must be a live handle; `buf` must hold `len` bytes; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn bp_env_export_document(
    env: *const BpEnv,
    buf: *mut u8,
    len: usize,
    written: *mut usize,
) -> BpStatus {
    guard(|| {
        let Some(env) = env.as_ref() else {
            return fail(BpStatus::NullArgument, "env is null");
        };
        copy_out(&env.state.export_document(), buf, len, written)
    })
}

/// Run a benchmark task (JSON) with the scripted backend and return the run
/// report as a NUL-terminated JSON string to be freed with [`bp_string_free`].
///
/// # Safety
/// `task_json` must be NUL-terminated; `report_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bp_run_task_json(
    task_json: *const c_char,
    seed: u64,
    fault_rate: f64,
    report_json: *mut *mut c_char,
) -> BpStatus {
    guard(|| {
        if report_json.is_null() {
            return fail(BpStatus::NullArgument, "report_json is null");
        }
        let text = match read_str(task_json, "task_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        if let Err(s) = valid_rate(fault_rate) {
            return s;
        }
        let task = match BenchmarkTask::from_json(text.as_bytes()) {
            Ok(t) => t,
            Err(e) => return fail(BpStatus::ParseError, e.to_string()),
        };
        let config = RunConfig { seed, fault_rate, ..RunConfig::default() };
        let run = match run_task(&task.task, &task.ground_truth, &config, &ScriptedBackend, &DocIndex::builtin()) {
            Ok(r) => r,
            Err(e) => return fail(BpStatus::TaskError, e.to_string()),
        };
        let json = serde_json::to_string(&run.report).expect("report serializes");
        *report_json = CString::new(json).expect("JSON has no NUL").into_raw();
        BpStatus::Ok
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
