use icnd2d::admm::AdmmConfig;
use icnd2d::scenario::{generate_topology, Config};
use icnd2d::simloop::{run_interval, update_roles, SimState, SolverChoice};
use icnd2d::solver_exact::ExactLimits;

fn cumulative(solver: &SolverChoice, intervals: u64, seed: u64) -> f64 {
    let cfg = Config::default();
    let mut state = SimState::new(generate_topology(&cfg, seed).unwrap(), seed).unwrap();
    for _ in 0..intervals {
        run_interval(&mut state, solver, seed).unwrap();
        update_roles(&mut state, seed);
        let violations = state.cache_state.capacity_violations(&state.scenario.config);
        assert!(violations.is_empty(), "{violations:?}");
    }
    state.cumulative[solver.name()]
}

#[test]
fn admm_tracks_bounded_exact_over_fifty_intervals() {
    let exact = cumulative(&SolverChoice::Exact(ExactLimits::default()), 50, 11);
    let admm = cumulative(&SolverChoice::Admm(AdmmConfig::default()), 50, 11);
    assert!(exact > 0.0);
    let rel = (exact - admm).abs() / exact;
    assert!(rel <= 0.10, "admm {admm} vs exact {exact}: {:.2}%", 100.0 * rel);
}
