use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn icnd2d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icnd2d")).args(args).env_remove("ICND2D_THREADS").output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn fig4() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/fig4.json")
}

#[test]
fn gen_rejects_zero_contents_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"num_contents": 0, "bs_cache_capacity": 0, "device_cache_capacity": 0}"#).unwrap();
    let out = icnd2d(&["gen", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("s.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("num_contents"));
}

#[test]
fn unknown_config_key_is_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    std::fs::write(&cfg, r#"{"num_requester": 3}"#).unwrap();
    let out = icnd2d(&["gen", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("s.json"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn argument_errors_and_help() {
    assert_eq!(icnd2d(&["sweep", "--param", "requesters"]).status.code(), Some(3));
    assert_eq!(icnd2d(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(icnd2d(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let out = icnd2d(&["solve", "--scenario", path_str(&dir.path().join("missing.json")), "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
    let bad_param = icnd2d(&["sweep", "--param", "bandwidth", "--values", "1:2:1", "--out", "x.csv"]);
    assert_eq!(bad_param.status.code(), Some(3));
}

#[test]
fn gen_then_solve_with_every_solver() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    assert!(icnd2d(&["gen", "--seed", "4", "--out", path_str(&scenario)]).status.success());
    let mut objectives = Vec::new();
    for solver in ["exact", "admm", "no-caching", "no-d2d"] {
        let out = dir.path().join(format!("{solver}.json"));
        let run = icnd2d(&["solve", "--scenario", path_str(&scenario), "--solver", solver, "--out", path_str(&out)]);
        assert!(run.status.success(), "{solver}: {}", String::from_utf8_lossy(&run.stderr));
        let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(report["solver"], solver);
        assert_eq!(report["feasible"], true);
        objectives.push(report["objective"].as_f64().unwrap());
    }
    // Every other solver searches a subset of what the exact solver covers.
    assert!(objectives[1..].iter().all(|&o| o <= objectives[0] + 1e-9), "{objectives:?}");
}

#[test]
fn sweep_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "sweep".to_string(),
            "--config".into(),
            fig4().display().to_string(),
            "--param".into(),
            "requesters".into(),
            "--values".into(),
            "10:20:5".into(),
            "--seeds".into(),
            "3".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let status_a = Command::new(env!("CARGO_BIN_EXE_icnd2d")).args(args(&a)).env("ICND2D_THREADS", "1").status().unwrap();
    let status_b = Command::new(env!("CARGO_BIN_EXE_icnd2d")).args(args(&b)).env("ICND2D_THREADS", "4").status().unwrap();
    assert!(status_a.success() && status_b.success());
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sweep_param_value,solver,mean_utility,stderr,seeds");
    assert_eq!(lines.len(), 1 + 3 * 4);
    assert!(lines[1].starts_with("10,exact,"));
}

#[test]
fn bad_thread_count_is_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_icnd2d"))
        .args(["sweep", "--param", "requesters", "--values", "2:2:1", "--seeds", "1", "--out"])
        .arg(dir.path().join("x.csv"))
        .env("ICND2D_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn convergence_writes_one_trace_per_rho() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.csv");
    let plot = dir.path().join("conv");
    let run = icnd2d(&["convergence", "--rho", "500,550,600", "--seed", "2", "--out", path_str(&out), "--plot", path_str(&plot)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let mut finals = Vec::new();
    for rho in ["500", "550", "600"] {
        let text = std::fs::read_to_string(dir.path().join(format!("conv_rho{rho}.csv"))).unwrap();
        assert!(text.starts_with("iteration,relaxed_utility,primal_residual,dual_residual,repaired_utility\n"));
        let last = text.lines().last().unwrap();
        finals.push(last.split(',').nth(4).unwrap().parse::<f64>().unwrap());
        assert!(dir.path().join(format!("conv_rho{rho}.dat")).exists());
    }
    for a in &finals {
        for b in &finals {
            assert!((a - b).abs() <= 0.005 * a.abs().max(b.abs()), "{finals:?}");
        }
    }
}

#[test]
fn simulate_writes_one_row_per_interval() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let run = icnd2d(&["simulate", "--intervals", "4", "--solver", "no-d2d", "--out", path_str(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "interval,solver,objective,served_requesters,d2d_links_used,bs_cache_contents,transmitter_count");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(1) == Some("no-d2d")));
    // The no-D2D ablation never uses a D2D link.
    assert!(lines[1..].iter().all(|l| l.split(',').nth(4) == Some("0")));
}
