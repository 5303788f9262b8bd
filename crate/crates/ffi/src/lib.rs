//! C ABI over the coordfree library.
//!
//! Queries and instances are opaque heap handles released with their
//! `_free` function. Every fallible call returns a [`CfStatus`]; on failure
//! [`cf_last_error_message`] describes the error for the calling thread.
//! Strings handed out by the library are released with [`cf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use coordfree::monocheck::{classify_query, Bounds, MonoClass};
use coordfree::scenario::ScenarioSpec;
use coordfree::simulator::{run, run_heartbeat_only, RunMode};
use coordfree::{builtin, eval_query, Instance, Query};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Query = 4,
    Scenario = 5,
    Simulation = 6,
    Panic = 7,
}

/// Bit positions in the mask written by [`cf_classify`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfClass {
    Monotone = 0,
    AdomMonotone = 1,
    WeakAdomMonotone = 2,
    WeakAdomInstance = 3,
}

/// Opaque query handle.
pub struct CfQuery(Query);

/// Opaque instance handle.
pub struct CfInstance(Instance);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(CfStatus, String);

impl Fail {
    fn new(status: CfStatus, e: impl ToString) -> Self {
        Fail(status, e.to_string())
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CfStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(Fail::new(CfStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Fail::new(CfStatus::InvalidUtf8, e))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail::new(CfStatus::NullPointer, "null handle"))
}

unsafe fn out<T>(p: *mut T, value: T) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::new(CfStatus::NullPointer, "null output pointer"));
    }
    p.write(value);
    Ok(())
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .unwrap_or_default()
        .into_raw()
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn cf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Looks up a bundled query: `tc`, `asym`, `remark33` or `winmove`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_query_builtin(
    name: *const c_char,
    out_query: *mut *mut CfQuery,
) -> CfStatus {
    guard(|| {
        let q = builtin(text(name)?).map_err(|e| Fail::new(CfStatus::Query, e))?;
        out(out_query, Box::into_raw(Box::new(CfQuery(q))))
    })
}

/// Parses a Datalog program.
///
/// # Safety
/// `program` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_query_parse(
    program: *const c_char,
    out_query: *mut *mut CfQuery,
) -> CfStatus {
    guard(|| {
        let q =
            Query::parse("program", text(program)?).map_err(|e| Fail::new(CfStatus::Parse, e))?;
        out(out_query, Box::into_raw(Box::new(CfQuery(q))))
    })
}

/// # Safety
/// `q` must come from this library and not have been freed; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn cf_query_free(q: *mut CfQuery) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Parses facts such as `e(a,b). e(b,c).`.
///
/// # Safety
/// `facts` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_instance_parse(
    facts: *const c_char,
    out_instance: *mut *mut CfInstance,
) -> CfStatus {
    guard(|| {
        let i = Instance::parse(text(facts)?).map_err(|e| Fail::new(CfStatus::Parse, e))?;
        out(out_instance, Box::into_raw(Box::new(CfInstance(i))))
    })
}

/// # Safety
/// `i` must come from this library and not have been freed; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn cf_instance_free(i: *mut CfInstance) {
    if !i.is_null() {
        drop(Box::from_raw(i));
    }
}

/// Number of facts; 0 for null.
///
/// # Safety
/// `i` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_instance_len(i: *const CfInstance) -> usize {
    i.as_ref().map_or(0, |i| i.0.len())
}

/// Canonically sorted fact text, one `fact.` per line.
///
/// # Safety
/// `i` must be a live handle; `out` must be writable. Free the result with
/// [`cf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cf_instance_to_string(
    i: *const CfInstance,
    out_text: *mut *mut c_char,
) -> CfStatus {
    guard(|| {
        let i = handle(i)?;
        out(out_text, c_string(i.0.to_text()))
    })
}

/// Evaluates `q` on `i`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_eval(
    q: *const CfQuery,
    i: *const CfInstance,
    out_instance: *mut *mut CfInstance,
) -> CfStatus {
    guard(|| {
        let (q, i) = (handle(q)?, handle(i)?);
        let r = eval_query(&q.0, &i.0).map_err(|e| Fail::new(CfStatus::Query, e))?;
        out(out_instance, Box::into_raw(Box::new(CfInstance(r))))
    })
}

/// Runs the bounded monotonicity checks. Bit `CfClass` of `holds_mask` is
/// set when that class holds within the bounds; `report` (optional)
/// receives the textual verdicts.
///
/// # Safety
/// `q` must be live; `holds_mask` must be writable; `report` may be null.
#[no_mangle]
pub unsafe extern "C" fn cf_classify(
    q: *const CfQuery,
    domain_size: usize,
    max_facts: usize,
    extra_fresh: usize,
    holds_mask: *mut u32,
    report: *mut *mut c_char,
) -> CfStatus {
    guard(|| {
        let q = handle(q)?;
        let r = classify_query(&q.0, Bounds::new(domain_size, max_facts, extra_fresh))
            .map_err(|e| Fail::new(CfStatus::Query, e))?;
        let mask = MonoClass::ALL
            .iter()
            .enumerate()
            .filter(|(_, c)| r.holds(**c))
            .fold(0u32, |m, (bit, _)| m | (1 << bit));
        out(holds_mask, mask)?;
        if !report.is_null() {
            report.write(c_string(r.to_text()));
        }
        Ok(())
    })
}

/// Runs a scenario document in its configured mode (fair-random or
/// heartbeat-only). File references resolve against `base_dir`, or the
/// working directory when null.
///
/// # Safety
/// Strings must be NUL-terminated (`base_dir` may be null); outputs must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cf_run_scenario(
    scenario_json: *const c_char,
    base_dir: *const c_char,
    out_output: *mut *mut CfInstance,
    out_converged: *mut bool,
) -> CfStatus {
    guard(|| {
        let spec = ScenarioSpec::from_json(text(scenario_json)?)
            .map_err(|e| Fail::new(CfStatus::Scenario, e))?;
        let base = if base_dir.is_null() {
            "."
        } else {
            text(base_dir)?
        };
        let s = spec
            .resolve(Path::new(base))
            .map_err(|e| Fail::new(CfStatus::Scenario, e))?;
        let p = s.protocol.as_ref();
        let (output, converged) = match s.config.mode {
            RunMode::FairRandom => {
                let r = run(p, &s.graph, &s.input, &s.policy, &s.config)
                    .map_err(|e| Fail::new(CfStatus::Simulation, e))?;
                (r.output, r.converged)
            }
            RunMode::HeartbeatOnly => {
                let r = run_heartbeat_only(p, &s.graph, &s.input, &s.policy, s.config.rounds)
                    .map_err(|e| Fail::new(CfStatus::Simulation, e))?;
                (r.output, r.heartbeat_fixpoint)
            }
            RunMode::Exhaustive { .. } => {
                return Err(Fail::new(
                    CfStatus::Scenario,
                    "exhaustive mode is not available through the C interface",
                ))
            }
        };
        out(out_converged, converged)?;
        out(out_output, Box::into_raw(Box::new(CfInstance(output))))
    })
}
