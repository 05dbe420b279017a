//! Multi-interval simulation: demands, allocation, cache refresh, popularity
//! tracking and role transitions.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::admm::{solve_admm, AdmmConfig};
use crate::baselines::{solve_no_caching, solve_no_d2d};
use crate::channel::sample_channels;
use crate::economy::{estimate_backhaul_saving, update_popularity_estimate, PopularityEstimate};
use crate::error::{Error, Result};
use crate::problem::{build_problem, Allocation, AllocationProblem, Solution};
use crate::rng;
use crate::scenario::{draw_demands, initial_cache_placement, CacheState, DemandSet, Role, Scenario};
use crate::solver_exact::{solve_exact, ExactLimits};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolverChoice {
    Exact(ExactLimits),
    Admm(AdmmConfig),
    NoCaching(AdmmConfig),
    NoD2d(AdmmConfig),
}

impl SolverChoice {
    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Exact(_) => "exact",
            SolverChoice::Admm(_) => "admm",
            SolverChoice::NoCaching(_) => "no-caching",
            SolverChoice::NoD2d(_) => "no-d2d",
        }
    }

    /// Parses a CLI solver name with the given ADMM settings and exact limits.
    pub fn parse(name: &str, admm: AdmmConfig, exact: ExactLimits) -> Result<Self> {
        match name {
            "exact" => Ok(SolverChoice::Exact(exact)),
            "admm" => Ok(SolverChoice::Admm(admm)),
            "no-caching" => Ok(SolverChoice::NoCaching(admm)),
            "no-d2d" => Ok(SolverChoice::NoD2d(admm)),
            other => Err(Error::InvalidArgument(format!(
                "unknown solver `{other}` (expected exact, admm, no-caching or no-d2d)"
            ))),
        }
    }

    pub fn solve(&self, problem: &AllocationProblem) -> Result<Solution> {
        match self {
            SolverChoice::Exact(limits) => Ok(solve_exact(problem, *limits)?.solution),
            SolverChoice::Admm(cfg) => Ok(solve_admm(problem, cfg)?.solution),
            SolverChoice::NoCaching(cfg) => solve_no_caching(problem, cfg),
            SolverChoice::NoD2d(cfg) => solve_no_d2d(problem, cfg),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub scenario: Scenario,
    pub cache_state: CacheState,
    pub popularity_estimate: PopularityEstimate,
    pub interval_index: u64,
    /// Running utility total per solver name.
    pub cumulative: BTreeMap<String, f64>,
}

impl SimState {
    /// Starts from the initial cache placement and the true popularity profile.
    pub fn new(scenario: Scenario, seed: u64) -> Result<Self> {
        let cache_state = initial_cache_placement(&scenario, seed);
        let popularity_estimate = PopularityEstimate::from_profile(&scenario.popularity, scenario.config.ema_gamma)?;
        Ok(Self { scenario, cache_state, popularity_estimate, interval_index: 0, cumulative: BTreeMap::new() })
    }

    pub fn transmitter_count(&self) -> usize {
        self.scenario.num_transmitters()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub interval: u64,
    pub solver: String,
    pub allocation: Allocation,
    pub objective: f64,
    pub demands: DemandSet,
    pub served_requesters: usize,
    pub d2d_links_used: usize,
    pub bs_cache_contents: usize,
    pub transmitter_count: usize,
}

impl IntervalResult {
    pub const CSV_HEADER: &'static str =
        "interval,solver,objective,served_requesters,d2d_links_used,bs_cache_contents,transmitter_count";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.interval,
            self.solver,
            crate::report::format_sig(self.objective),
            self.served_requesters,
            self.d2d_links_used,
            self.bs_cache_contents,
            self.transmitter_count
        )
    }
}

/// One refresh interval: draw demands, sample channels, build and solve the
/// problem, refresh caches, update the popularity estimate and advance.
pub fn run_interval(state: &mut SimState, solver: &SolverChoice, seed: u64) -> Result<IntervalResult> {
    let key = rng::derive_key(seed, rng::DEMANDS, &[state.interval_index]);
    let demands = draw_demands(&state.scenario, &state.scenario.popularity, key);
    let channels = sample_channels(&state.scenario, rng::derive_key(seed, rng::CHANNEL, &[state.interval_index]))?;
    let problem = build_problem(&state.scenario, &state.cache_state, &demands, &channels, &state.popularity_estimate)?;
    let solution = solver.solve(&problem)?;

    if !demands.is_empty() {
        state.cache_state = refresh_caches(state, &problem, &solution.allocation);
        state.popularity_estimate = update_popularity_estimate(&state.popularity_estimate, &demands)?;
    }
    *state.cumulative.entry(solver.name().to_string()).or_default() += solution.objective;
    let result = IntervalResult {
        interval: state.interval_index,
        solver: solver.name().to_string(),
        served_requesters: solution.allocation.served_requesters(),
        d2d_links_used: solution.allocation.d2d_links_used(&problem),
        bs_cache_contents: state.cache_state.bs_cache.len(),
        transmitter_count: state.transmitter_count(),
        objective: solution.objective,
        allocation: solution.allocation,
        demands,
    };
    state.interval_index += 1;
    Ok(result)
}

/// Net estimated gain of keeping `content` in a device cache.
fn device_cache_gain(state: &SimState, content: usize) -> f64 {
    let cfg = &state.scenario.config;
    let c = &state.scenario.contents[content];
    let e = estimate_backhaul_saving(c, &state.popularity_estimate, state.scenario.num_requesters());
    cfg.prices.phi_per_mb * e - cfg.prices.psi_dev_per_mb * c.size_mb
}

/// Requesters store contents received with `z = 1`, evicting their least
/// valuable content only for a strictly more valuable newcomer; the BS cache
/// becomes the `V = 1` set.
pub fn refresh_caches(state: &SimState, problem: &AllocationProblem, allocation: &Allocation) -> CacheState {
    let cap = state.scenario.config.device_cache_capacity;
    let mut next = state.cache_state.clone();
    for l in &problem.links {
        if !(l.is_d2d() && allocation.x[l.link_id] && allocation.z[l.link_id]) {
            continue;
        }
        let held = next.device_caches.entry(l.requester).or_default();
        if held.contains(&l.content) {
            continue;
        }
        if held.len() < cap {
            held.insert(l.content);
            continue;
        }
        let incumbent = held
            .iter()
            .map(|&c| (device_cache_gain(state, c), c))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((gain, c)) = incumbent {
            if device_cache_gain(state, l.content) > gain {
                held.remove(&c);
                held.insert(l.content);
            }
        }
    }
    next.bs_cache = allocation.v.iter().enumerate().filter(|(_, &v)| v).map(|(c, _)| c).collect();
    next
}

/// Role counts after a transition step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleCounts {
    pub transmitters: usize,
    pub requesters: usize,
    pub became_transmitter: usize,
    pub became_requester: usize,
}

/// Requesters holding cached content turn transmitter with probability
/// `role_flip_prob`; transmitters whose cache is empty turn requester with the
/// same probability.
pub fn update_roles(state: &mut SimState, seed: u64) -> RoleCounts {
    let p = state.scenario.config.role_flip_prob;
    let mut rng = rng::stream(seed, rng::ROLES, &[state.interval_index]);
    let (mut up, mut down) = (0, 0);
    for node in &mut state.scenario.nodes {
        let cached = state.cache_state.device(node.id).is_some_and(|s| !s.is_empty());
        let eligible = match node.role {
            Role::Requester => cached,
            Role::Transmitter => !cached,
        };
        // One draw per node keeps the stream aligned regardless of eligibility.
        let flip = rng.gen::<f64>() < p;
        if eligible && flip {
            match node.role {
                Role::Requester => {
                    node.role = Role::Transmitter;
                    up += 1;
                }
                Role::Transmitter => {
                    node.role = Role::Requester;
                    down += 1;
                }
            }
        }
    }
    RoleCounts {
        transmitters: state.scenario.num_transmitters(),
        requesters: state.scenario.num_requesters(),
        became_transmitter: up,
        became_requester: down,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_topology, Config};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn small_config() -> Config {
        Config { num_transmitters: 6, num_requesters: 5, num_contents: 3, bs_cache_capacity: 2, ..Config::default() }
    }

    fn state(cfg: &Config, seed: u64) -> SimState {
        SimState::new(generate_topology(cfg, seed).unwrap(), seed).unwrap()
    }

    fn admm() -> SolverChoice {
        SolverChoice::Admm(AdmmConfig::default())
    }

    #[test]
    fn interval_is_deterministic() {
        let cfg = small_config();
        let (mut a, mut b) = (state(&cfg, 3), state(&cfg, 3));
        let ra = run_interval(&mut a, &admm(), 11).unwrap();
        let rb = run_interval(&mut b, &admm(), 11).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
        assert_eq!(a.interval_index, 1);
    }

    #[test]
    fn no_requesters_only_advances_the_index() {
        let cfg = small_config();
        let mut s = state(&cfg, 4);
        for n in &mut s.scenario.nodes {
            n.role = Role::Transmitter;
        }
        let before = s.clone();
        let r = run_interval(&mut s, &admm(), 1).unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(s.interval_index, 1);
        assert_eq!(s.cache_state, before.cache_state);
        assert_eq!(s.popularity_estimate, before.popularity_estimate);
        assert_eq!(s.scenario, before.scenario);
    }

    fn d2d_problem(s: &SimState, requester: usize, content: usize) -> AllocationProblem {
        use crate::channel::TxId;
        use crate::problem::fixtures::link;
        use crate::problem::RequesterEntry;
        let l = link(0, TxId::Device(0), requester, content, 5.0, 0.3, 1.0);
        AllocationProblem::new(
            vec![RequesterEntry { node: requester, content }],
            s.scenario.contents.clone(),
            vec![l],
            10.0,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn refresh_examples() {
        let cfg = small_config();
        let mut s = state(&cfg, 5);
        let q = s.scenario.requesters().next().unwrap().id;
        s.cache_state.device_caches.insert(q, BTreeSet::new());

        let p = d2d_problem(&s, q, 2);
        let mut alloc = Allocation::zeros(&p);
        alloc.v = s.scenario.contents.iter().map(|c| s.cache_state.bs_cache.contains(&c.id)).collect();
        assert_eq!(refresh_caches(&s, &p, &alloc), s.cache_state);

        alloc.x[0] = true;
        alloc.y[0] = 1.0;
        alloc.z[0] = true;
        let next = refresh_caches(&s, &p, &alloc);
        assert_eq!(next.device(q).unwrap(), &BTreeSet::from([2]));

        // Content 1 is more popular than content 2 under the Zipf estimate, so
        // its cache gain is larger and the newcomer is refused.
        s.cache_state.device_caches.insert(q, BTreeSet::from([1]));
        assert!(device_cache_gain(&s, 1) > device_cache_gain(&s, 2));
        let next = refresh_caches(&s, &p, &alloc);
        assert_eq!(next.device(q).unwrap(), &BTreeSet::from([1]));

        // The reverse swap is accepted.
        let p0 = d2d_problem(&s, q, 0);
        let next = refresh_caches(&s, &p0, &Allocation { v: alloc.v.clone(), ..alloc.clone() });
        assert_eq!(next.device(q).unwrap(), &BTreeSet::from([0]));
    }

    #[test]
    fn role_examples() {
        let mut cfg = small_config();
        cfg.dev_cache_init_prob = 0.0;
        let mut s = state(&cfg, 6);
        // All caches empty: requesters stay, and with p = 0 nothing moves.
        s.scenario.config.role_flip_prob = 0.0;
        let before = s.scenario.clone();
        let counts = update_roles(&mut s, 1);
        assert_eq!(s.scenario, before);
        assert_eq!(counts.became_transmitter + counts.became_requester, 0);

        s.scenario.config.role_flip_prob = 1.0;
        for n in s.scenario.nodes.iter_mut() {
            n.role = Role::Requester;
        }
        let first = s.scenario.requesters().next().unwrap().id;
        s.cache_state.device_caches.insert(first, BTreeSet::from([0]));
        let counts = update_roles(&mut s, 1);
        assert_eq!(counts.became_transmitter, 1);
        assert_eq!(s.scenario.nodes[first].role, Role::Transmitter);
        assert_eq!(counts.transmitters, 1);
    }

    #[test]
    fn static_roles_with_zero_flip_probability() {
        let mut cfg = small_config();
        cfg.role_flip_prob = 0.0;
        let mut s = state(&cfg, 8);
        let roles: Vec<Role> = s.scenario.nodes.iter().map(|n| n.role).collect();
        for k in 0..10 {
            run_interval(&mut s, &admm(), k).unwrap();
            update_roles(&mut s, k);
        }
        assert_eq!(roles, s.scenario.nodes.iter().map(|n| n.role).collect::<Vec<_>>());
    }

    #[test]
    fn stationary_under_identical_inputs() {
        let mut cfg = small_config();
        cfg.role_flip_prob = 0.0;
        let s = state(&cfg, 9);
        let (mut a, mut b) = (s.clone(), s.clone());
        b.interval_index = 0;
        let ra = run_interval(&mut a, &admm(), 2).unwrap();
        let rb = run_interval(&mut b, &admm(), 2).unwrap();
        assert_eq!(ra.allocation, rb.allocation);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn capacity_invariants_hold(seed in 0u64..1000) {
            let cfg = small_config();
            let mut s = state(&cfg, seed);
            for k in 0..125 {
                run_interval(&mut s, &admm(), seed + k).unwrap();
                update_roles(&mut s, seed + k);
                prop_assert!(s.cache_state.capacity_violations(&cfg).is_empty());
            }
        }
    }
}
