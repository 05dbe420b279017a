use std::ffi::{CStr, CString};
use std::ptr;

use icnd2d_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(icnd2d_last_error_message()) }.to_string_lossy().into_owned()
}

fn generate(config: Option<&str>, seed: u64) -> *mut Icnd2dInstance {
    let cfg = config.map(|c| CString::new(c).unwrap());
    let mut inst = ptr::null_mut();
    let status = unsafe { icnd2d_instance_generate(cfg.as_ref().map_or(ptr::null(), |c| c.as_ptr()), seed, &mut inst) };
    assert_eq!(status, Icnd2dStatus::Ok, "{}", last_error());
    inst
}

#[test]
fn generate_solve_and_free() {
    let inst = generate(Some(r#"{"num_requesters": 6, "num_transmitters": 4}"#), 3);
    let (mut requesters, mut links) = (0usize, 0usize);
    assert_eq!(unsafe { icnd2d_instance_size(inst, &mut requesters, &mut links) }, Icnd2dStatus::Ok);
    assert_eq!(requesters, 6);
    assert!(links >= 1);

    let mut objectives = Vec::new();
    for solver in [Icnd2dSolver::Exact, Icnd2dSolver::Admm, Icnd2dSolver::NoCaching, Icnd2dSolver::NoD2d] {
        let mut sol = ptr::null_mut();
        assert_eq!(unsafe { icnd2d_solve(inst, solver, 500.0, 0, &mut sol) }, Icnd2dStatus::Ok, "{}", last_error());
        let (mut objective, mut feasible) = (f64::NAN, false);
        assert_eq!(unsafe { icnd2d_solution_objective(sol, &mut objective) }, Icnd2dStatus::Ok);
        assert_eq!(unsafe { icnd2d_solution_is_feasible(sol, &mut feasible) }, Icnd2dStatus::Ok);
        assert!(feasible);
        objectives.push(objective);

        let mut json = ptr::null_mut();
        assert_eq!(unsafe { icnd2d_solution_to_json(sol, &mut json) }, Icnd2dStatus::Ok);
        let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["objective"].as_f64(), Some(objective));
        unsafe {
            icnd2d_string_free(json);
            icnd2d_solution_free(sol);
        }
    }
    assert!(objectives[1..].iter().all(|&o| o <= objectives[0] + 1e-9), "{objectives:?}");
    unsafe { icnd2d_instance_free(inst) };
}

#[test]
fn instance_json_round_trip() {
    let inst = generate(None, 9);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { icnd2d_instance_to_json(inst, &mut json) }, Icnd2dStatus::Ok);
    let mut copy = ptr::null_mut();
    assert_eq!(unsafe { icnd2d_instance_from_json(json, &mut copy) }, Icnd2dStatus::Ok, "{}", last_error());

    let mut again = ptr::null_mut();
    assert_eq!(unsafe { icnd2d_instance_to_json(copy, &mut again) }, Icnd2dStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(json) }, unsafe { CStr::from_ptr(again) });
    unsafe {
        icnd2d_string_free(json);
        icnd2d_string_free(again);
        icnd2d_instance_free(inst);
        icnd2d_instance_free(copy);
    }
}

#[test]
fn null_pointers_are_reported() {
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { icnd2d_instance_generate(ptr::null(), 0, ptr::null_mut()) }, Icnd2dStatus::NullPointer);
    assert!(last_error().contains("out"));
    assert_eq!(unsafe { icnd2d_instance_from_json(ptr::null(), &mut inst) }, Icnd2dStatus::NullPointer);
    assert!(inst.is_null());
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { icnd2d_solve(ptr::null(), Icnd2dSolver::Admm, 500.0, 0, &mut sol) }, Icnd2dStatus::NullPointer);
    assert!(sol.is_null());
    let mut objective = 0.0;
    assert_eq!(unsafe { icnd2d_solution_objective(ptr::null(), &mut objective) }, Icnd2dStatus::NullPointer);
    // Freeing null is a no-op.
    unsafe {
        icnd2d_instance_free(ptr::null_mut());
        icnd2d_solution_free(ptr::null_mut());
        icnd2d_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let mut inst = ptr::null_mut();
    let garbage = CString::new("{not json").unwrap();
    assert_eq!(unsafe { icnd2d_instance_from_json(garbage.as_ptr(), &mut inst) }, Icnd2dStatus::Parse);
    assert!(!last_error().is_empty());

    let bad = CString::new(r#"{"num_contents": 0}"#).unwrap();
    assert_eq!(unsafe { icnd2d_instance_generate(bad.as_ptr(), 0, &mut inst) }, Icnd2dStatus::InvalidArgument);
    assert!(last_error().contains("num_contents"));
    assert!(inst.is_null());

    let inst = generate(Some(r#"{"num_requesters": 3, "num_transmitters": 2}"#), 1);
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { icnd2d_solve(inst, Icnd2dSolver::Admm, -1.0, 0, &mut sol) }, Icnd2dStatus::InvalidArgument);
    assert!(last_error().contains("rho"));
    assert_eq!(unsafe { icnd2d_solve(inst, Icnd2dSolver::Exact, 500.0, 0, &mut sol) }, Icnd2dStatus::Ok);
    assert!(last_error().is_empty());
    unsafe {
        icnd2d_solution_free(sol);
        icnd2d_instance_free(inst);
    }
}

#[test]
fn header_declares_the_exported_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/icnd2d.h")).unwrap();
    for name in [
        "icnd2d_last_error_message",
        "icnd2d_instance_generate",
        "icnd2d_instance_from_json",
        "icnd2d_instance_to_json",
        "icnd2d_instance_size",
        "icnd2d_solve",
        "icnd2d_solution_objective",
        "icnd2d_solution_is_feasible",
        "icnd2d_solution_to_json",
        "icnd2d_string_free",
        "icnd2d_instance_free",
        "icnd2d_solution_free",
        "ICND2D_STATUS_PARSE",
        "ICND2D_SOLVER_NO_D2D",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
