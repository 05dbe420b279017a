//! C ABI over the `icnd2d` instance generator and solvers.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free` function. Every fallible call returns an
//! [`Icnd2dStatus`]; on failure [`icnd2d_last_error_message`] describes the
//! error for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use icnd2d::admm::AdmmConfig;
use icnd2d::problem::{check_feasible, Solution};
use icnd2d::report::{build_instance, Instance};
use icnd2d::scenario::Config;
use icnd2d::simloop::SolverChoice;
use icnd2d::solver_exact::ExactLimits;
use icnd2d::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Icnd2dStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    Parse = 4,
    Io = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Icnd2dSolver {
    Exact = 0,
    Admm = 1,
    NoCaching = 2,
    NoD2d = 3,
}

/// A generated instance: scenario, caches, demands and the allocation problem.
pub struct Icnd2dInstance {
    inner: Instance,
}

/// A solved allocation with its objective and feasibility verdict.
pub struct Icnd2dSolution {
    inner: Solution,
    feasible: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> Icnd2dStatus {
    match err {
        Error::Json(_) => Icnd2dStatus::Parse,
        Error::Io(_) => Icnd2dStatus::Io,
        Error::InfeasibleRate { .. } | Error::Infeasible(_) => Icnd2dStatus::Infeasible,
        _ => Icnd2dStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (Icnd2dStatus, String)>) -> Icnd2dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            Icnd2dStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            Icnd2dStatus::Internal
        }
    }
}

fn lift(err: Error) -> (Icnd2dStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (Icnd2dStatus, String) {
    (Icnd2dStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (Icnd2dStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (Icnd2dStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn to_c_string(s: String) -> Result<*mut c_char, (Icnd2dStatus, String)> {
    CString::new(s).map(CString::into_raw).map_err(|_| (Icnd2dStatus::Internal, "interior NUL in output".into()))
}

/// Message describing the last failed call on this thread; empty after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn icnd2d_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Generates a seeded instance. `config_json` may be null for the default
/// configuration.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string; `out` must be a
/// valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn icnd2d_instance_generate(
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut Icnd2dInstance,
) -> Icnd2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = if config_json.is_null() {
            Config::default()
        } else {
            Config::from_json(read_str(config_json, "config_json")?).map_err(lift)?
        };
        let inner = build_instance(&cfg, seed).map_err(lift)?;
        *out = Box::into_raw(Box::new(Icnd2dInstance { inner }));
        Ok(())
    })
}

/// Parses an instance previously produced by [`icnd2d_instance_to_json`] or the CLI.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn icnd2d_instance_from_json(json: *const c_char, out: *mut *mut Icnd2dInstance) -> Icnd2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inner: Instance = serde_json::from_str(read_str(json, "json")?).map_err(|e| lift(e.into()))?;
        *out = Box::into_raw(Box::new(Icnd2dInstance { inner }));
        Ok(())
    })
}

/// Serializes an instance; free the string with [`icnd2d_string_free`].
///
/// # Safety
/// `instance` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn icnd2d_instance_to_json(instance: *const Icnd2dInstance, out: *mut *mut c_char) -> Icnd2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        *out = to_c_string(serde_json::to_string(&inst.inner).map_err(|e| lift(e.into()))?)?;
        Ok(())
    })
}

/// Number of requesters and candidate links in the instance's problem.
///
/// # Safety
/// `instance` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn icnd2d_instance_size(
    instance: *const Icnd2dInstance,
    num_requesters: *mut usize,
    num_links: *mut usize,
) -> Icnd2dStatus {
    guard(|| {
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        if num_requesters.is_null() || num_links.is_null() {
            return Err(null("output pointer"));
        }
        *num_requesters = inst.inner.problem.requesters.len();
        *num_links = inst.inner.problem.links.len();
        Ok(())
    })
}

/// Solves the instance. `rho` is the ADMM penalty (ignored by the exact
/// solver); `max_nodes` caps the exact search, 0 selecting the default.
///
/// # Safety
/// `instance` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn icnd2d_solve(
    instance: *const Icnd2dInstance,
    solver: Icnd2dSolver,
    rho: f64,
    max_nodes: u64,
    out: *mut *mut Icnd2dSolution,
) -> Icnd2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        let admm = AdmmConfig::with_rho(rho);
        admm.validate().map_err(lift)?;
        let limits = if max_nodes == 0 { ExactLimits::default() } else { ExactLimits { max_nodes: Some(max_nodes), time_budget_s: None } };
        let choice = match solver {
            Icnd2dSolver::Exact => SolverChoice::Exact(limits),
            Icnd2dSolver::Admm => SolverChoice::Admm(admm),
            Icnd2dSolver::NoCaching => SolverChoice::NoCaching(admm),
            Icnd2dSolver::NoD2d => SolverChoice::NoD2d(admm),
        };
        let inner = choice.solve(&inst.inner.problem).map_err(lift)?;
        let feasible = check_feasible(&inst.inner.problem, &inner.allocation).ok;
        *out = Box::into_raw(Box::new(Icnd2dSolution { inner, feasible }));
        Ok(())
    })
}

/// # Safety
/// `solution` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn icnd2d_solution_objective(solution: *const Icnd2dSolution, out: *mut f64) -> Icnd2dStatus {
    guard(|| {
        let sol = solution.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = sol.inner.objective;
        Ok(())
    })
}

/// # Safety
/// `solution` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn icnd2d_solution_is_feasible(solution: *const Icnd2dSolution, out: *mut bool) -> Icnd2dStatus {
    guard(|| {
        let sol = solution.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = sol.feasible;
        Ok(())
    })
}

/// Serializes the solution; free the string with [`icnd2d_string_free`].
///
/// # Safety
/// `solution` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn icnd2d_solution_to_json(solution: *const Icnd2dSolution, out: *mut *mut c_char) -> Icnd2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let sol = solution.as_ref().ok_or_else(|| null("solution"))?;
        *out = to_c_string(serde_json::to_string(&sol.inner).map_err(|e| lift(e.into()))?)?;
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn icnd2d_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `instance` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn icnd2d_instance_free(instance: *mut Icnd2dInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// # Safety
/// `solution` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn icnd2d_solution_free(solution: *mut Icnd2dSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}
