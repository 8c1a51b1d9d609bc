//! C ABI for the performance-estimation library.
//!
//! Results objects travel as opaque handles; every function returns a
//! status code and reports details through a thread-local error message.
//! Strings returned through out-parameters are heap allocations that the
//! caller releases with [`perfest_string_free`].
//!
//! ```c
//! PerfestResults *results = NULL;
//! if (perfest_run_config_file("experiment.json", &results) != PERFEST_STATUS_OK) {
//!     fprintf(stderr, "%s\n", perfest_last_error_message());
//!     return 1;
//! }
//! char *summary = NULL;
//! perfest_results_summary_json(results, &summary);
//! puts(summary);
//! perfest_string_free(summary);
//! perfest_results_free(results);
//! ```

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use perfest::analysis::{summarize, MaxsFlags};
use perfest::config::ExperimentConfig;
use perfest::engine::{
    load_results, performance_estimation, results_from_json, results_to_json, save_results,
    ComparisonResults, ExperimentOptions, NoProgress,
};
use perfest::stats::paired_comparisons;

/// Outcome of a C API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerfestStatus {
    Ok = 0,
    /// A pointer argument was null or otherwise unusable.
    InvalidArgument = 1,
    /// The configuration failed validation.
    InvalidConfig = 2,
    /// Reading or writing a file failed.
    Io = 3,
    /// A JSON document failed to parse.
    Parse = 4,
    /// The experiment or analysis itself failed.
    Failed = 5,
}

/// Opaque experiment-results handle.
pub struct PerfestResults {
    inner: ComparisonResults,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn perfest_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn perfest_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn read_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, PerfestStatus> {
    if ptr.is_null() {
        set_error(&format!("{name} is null"));
        return Err(PerfestStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{name} is not valid UTF-8"));
        PerfestStatus::InvalidArgument
    })
}

fn give_string(text: String, out: *mut *mut c_char) -> PerfestStatus {
    match CString::new(text.replace('\0', " ")) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            PerfestStatus::Ok
        }
        Err(_) => {
            set_error("output contained an interior NUL");
            PerfestStatus::Failed
        }
    }
}

fn give_results(results: ComparisonResults, out: *mut *mut PerfestResults) -> PerfestStatus {
    let handle = Box::new(PerfestResults { inner: results });
    unsafe { *out = Box::into_raw(handle) };
    PerfestStatus::Ok
}

fn run_config(config: ExperimentConfig, base_dir: &Path) -> Result<ComparisonResults, (PerfestStatus, String)> {
    let mut opts = ExperimentOptions::default();
    let problems = config.validate(&opts);
    if !problems.is_empty() {
        return Err((PerfestStatus::InvalidConfig, problems.join("; ")));
    }
    opts.cluster = config
        .cluster()
        .map_err(|e| (PerfestStatus::InvalidConfig, e))?;
    let tasks = config
        .load_tasks(base_dir)
        .map_err(|e| (PerfestStatus::Io, e))?;
    let workflows = config
        .build_workflows()
        .map_err(|e| (PerfestStatus::InvalidConfig, e))?;
    let est = config
        .estimation_task()
        .map_err(|e| (PerfestStatus::InvalidConfig, e))?;
    performance_estimation(&tasks, &workflows, &est, &opts, &NoProgress)
        .map_err(|e| (PerfestStatus::Failed, e.to_string()))
}

/// Runs the experiment described by a JSON config file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn perfest_run_config_file(
    path: *const c_char,
    out: *mut *mut PerfestResults,
) -> PerfestStatus {
    if out.is_null() {
        set_error("out is null");
        return PerfestStatus::InvalidArgument;
    }
    *out = ptr::null_mut();
    let path = match read_str(path, "path") {
        Ok(p) => Path::new(p),
        Err(status) => return status,
    };
    let config = match ExperimentConfig::from_file(path) {
        Ok(c) => c,
        Err(e) => {
            set_error(&e.to_string());
            return PerfestStatus::Parse;
        }
    };
    let base = path.parent().unwrap_or(Path::new("."));
    match run_config(config, base) {
        Ok(results) => give_results(results, out),
        Err((status, message)) => {
            set_error(&message);
            status
        }
    }
}

/// Runs the experiment described by a JSON config document. Relative CSV
/// paths resolve against the current working directory.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn perfest_run_config_json(
    json: *const c_char,
    out: *mut *mut PerfestResults,
) -> PerfestStatus {
    if out.is_null() {
        set_error("out is null");
        return PerfestStatus::InvalidArgument;
    }
    *out = ptr::null_mut();
    let text = match read_str(json, "json") {
        Ok(t) => t,
        Err(status) => return status,
    };
    let config = match ExperimentConfig::from_json(text) {
        Ok(c) => c,
        Err(e) => {
            set_error(&e.to_string());
            return PerfestStatus::Parse;
        }
    };
    match run_config(config, Path::new(".")) {
        Ok(results) => give_results(results, out),
        Err((status, message)) => {
            set_error(&message);
            status
        }
    }
}

/// Loads a results file written by this library.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn perfest_results_load(
    path: *const c_char,
    out: *mut *mut PerfestResults,
) -> PerfestStatus {
    if out.is_null() {
        set_error("out is null");
        return PerfestStatus::InvalidArgument;
    }
    *out = ptr::null_mut();
    let path = match read_str(path, "path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match load_results(path) {
        Ok(results) => give_results(results, out),
        Err(e) => {
            set_error(&e.to_string());
            PerfestStatus::Io
        }
    }
}

/// Parses a results JSON document.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn perfest_results_from_json(
    json: *const c_char,
    out: *mut *mut PerfestResults,
) -> PerfestStatus {
    if out.is_null() {
        set_error("out is null");
        return PerfestStatus::InvalidArgument;
    }
    *out = ptr::null_mut();
    let text = match read_str(json, "json") {
        Ok(t) => t,
        Err(status) => return status,
    };
    match results_from_json(text) {
        Ok(results) => give_results(results, out),
        Err(e) => {
            set_error(&e.to_string());
            PerfestStatus::Parse
        }
    }
}

unsafe fn borrow<'a>(
    handle: *const PerfestResults,
) -> Result<&'a ComparisonResults, PerfestStatus> {
    if handle.is_null() {
        set_error("results handle is null");
        return Err(PerfestStatus::InvalidArgument);
    }
    Ok(&(*handle).inner)
}

/// Writes a results handle to a file in the versioned JSON format.
///
/// # Safety
/// `handle` must come from this library; `path` must be a valid string.
#[no_mangle]
pub unsafe extern "C" fn perfest_results_save(
    handle: *const PerfestResults,
    path: *const c_char,
) -> PerfestStatus {
    let results = match borrow(handle) {
        Ok(r) => r,
        Err(status) => return status,
    };
    let path = match read_str(path, "path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match save_results(results, path) {
        Ok(()) => PerfestStatus::Ok,
        Err(e) => {
            set_error(&e.to_string());
            PerfestStatus::Io
        }
    }
}

/// Serializes a results handle to JSON.
///
/// # Safety
/// `handle` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn perfest_results_to_json(
    handle: *const PerfestResults,
    out: *mut *mut c_char,
) -> PerfestStatus {
    let results = match borrow(handle) {
        Ok(r) => r,
        Err(status) => return status,
    };
    if out.is_null() {
        set_error("out is null");
        return PerfestStatus::InvalidArgument;
    }
    give_string(results_to_json(results), out)
}

/// Number of predictive tasks in the results.
///
/// # Safety
/// `handle` must come from this library (null yields 0).
#[no_mangle]
pub unsafe extern "C" fn perfest_results_task_count(handle: *const PerfestResults) -> usize {
    borrow(handle).map(|r| r.tasks.len()).unwrap_or(0)
}

/// Number of workflows in the results.
///
/// # Safety
/// `handle` must come from this library (null yields 0).
#[no_mangle]
pub unsafe extern "C" fn perfest_results_workflow_count(handle: *const PerfestResults) -> usize {
    borrow(handle).map(|r| r.workflows.len()).unwrap_or(0)
}

/// Summary statistics (per task, workflow and metric) as a JSON document.
///
/// # Safety
/// `handle` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn perfest_results_summary_json(
    handle: *const PerfestResults,
    out: *mut *mut c_char,
) -> PerfestStatus {
    let results = match borrow(handle) {
        Ok(r) => r,
        Err(status) => return status,
    };
    if out.is_null() {
        set_error("out is null");
        return PerfestStatus::InvalidArgument;
    }
    let table = summarize(results);
    match serde_json::to_string_pretty(&table) {
        Ok(text) => give_string(text, out),
        Err(e) => {
            set_error(&e.to_string());
            PerfestStatus::Failed
        }
    }
}

/// Full paired-comparison report (rank matrices, Friedman, Nemenyi,
/// Bonferroni-Dunn, Wilcoxon and paired t) as a JSON document.
///
/// `baseline` may be null for the default (best average rank); `alpha`
/// values at or below 0 fall back to 0.05.
///
/// # Safety
/// `handle` must come from this library; `out` must be a valid pointer;
/// `baseline` must be null or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn perfest_paired_comparisons_json(
    handle: *const PerfestResults,
    baseline: *const c_char,
    alpha: f64,
    out: *mut *mut c_char,
) -> PerfestStatus {
    let results = match borrow(handle) {
        Ok(r) => r,
        Err(status) => return status,
    };
    if out.is_null() {
        set_error("out is null");
        return PerfestStatus::InvalidArgument;
    }
    let baseline = if baseline.is_null() {
        None
    } else {
        match read_str(baseline, "baseline") {
            Ok(b) => Some(b),
            Err(status) => return status,
        }
    };
    let alpha = if alpha > 0.0 { alpha } else { 0.05 };
    match paired_comparisons(results, baseline, &MaxsFlags::none(), alpha) {
        Ok(report) => match serde_json::to_string_pretty(&report) {
            Ok(text) => give_string(text, out),
            Err(e) => {
                set_error(&e.to_string());
                PerfestStatus::Failed
            }
        },
        Err(e) => {
            set_error(&e.to_string());
            PerfestStatus::Failed
        }
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be a pointer produced by this library (null is a no-op), and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn perfest_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Releases a results handle.
///
/// # Safety
/// `handle` must be a pointer produced by this library (null is a no-op),
/// and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn perfest_results_free(handle: *mut PerfestResults) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}
