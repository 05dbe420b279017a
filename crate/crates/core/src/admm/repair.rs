//! Recovery of a feasible mixed-binary allocation from relaxed ADMM iterates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{complete_allocation, AllocationProblem, Band, Solution, FEAS_TOL};
use crate::solver_exact::{bs_cache_values, select_bs_cache, z_value};

/// Relaxed decision variables indexed like [`crate::problem::Allocation`];
/// `z` holds requester caching on D2D links and zero on cellular links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedAllocation {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
}

impl RelaxedAllocation {
    pub fn zeros(problem: &AllocationProblem) -> Self {
        let n = problem.links.len();
        Self { x: vec![0.0; n], y: vec![0.0; n], z: vec![0.0; n], v: vec![0.0; problem.contents.len()] }
    }
}

/// Thresholds the relaxed assignments and repairs them into a feasible
/// allocation. Links at or above `threshold` are visited by decreasing
/// relaxed `x` (lowest link id on ties) and kept while their requester is
/// free, their transmitter is below its unicast limit and their band still
/// has room for `y_min`; a requester whose best link is rejected falls back
/// to its next link above the threshold. Caching is then chosen by gain and
/// the spectrum split is re-solved exactly.
pub fn round_and_repair(relaxed: &RelaxedAllocation, problem: &AllocationProblem, threshold: f64) -> Result<Solution> {
    let n = problem.links.len();
    if relaxed.x.len() != n || relaxed.y.len() != n || relaxed.z.len() != n || relaxed.v.len() != problem.contents.len() {
        return Err(Error::ShapeMismatch("relaxed allocation does not match the problem".into()));
    }
    let mut order: Vec<usize> = (0..n).filter(|&l| relaxed.x[l] >= threshold).collect();
    order.sort_by(|&a, &b| relaxed.x[b].total_cmp(&relaxed.x[a]).then(a.cmp(&b)));

    let mut x = vec![false; n];
    let mut requester_taken = vec![false; problem.requesters.len()];
    let mut device_load = std::collections::BTreeMap::<usize, usize>::new();
    let mut band_used = [0.0f64; 2];
    for l in order {
        let link = &problem.links[l];
        let q = problem.requester_index(link.requester).expect("validated problem");
        if requester_taken[q] {
            continue;
        }
        if let Some(dev) = link.device() {
            if device_load.get(&dev).copied().unwrap_or(0) >= problem.unicast_limit {
                continue;
            }
        }
        let b = usize::from(link.band() == Band::Uplink);
        if band_used[b] + link.y_min > problem.band_budget(link.band()) + FEAS_TOL {
            continue;
        }
        x[l] = true;
        requester_taken[q] = true;
        band_used[b] += link.y_min;
        if let Some(dev) = link.device() {
            *device_load.entry(dev).or_default() += 1;
        }
    }

    let z: Vec<bool> = (0..n).map(|l| x[l] && z_value(problem, l) > 0.0).collect();
    let sizes: Vec<f64> = problem.contents.iter().map(|c| c.size_mb).collect();
    let v = select_bs_cache(&sizes, &bs_cache_values(problem, &x), problem.bs_cache_capacity_mb);
    complete_allocation(problem, x, z, v)
}

/// Adds links for requesters left unserved while that raises the objective.
/// Each pass tries the remaining links in id order under the unicast and
/// `y_min` budget rules; caching and spectrum are re-chosen per trial.
pub fn fill_unserved(problem: &AllocationProblem, solution: Solution) -> Result<Solution> {
    let sizes: Vec<f64> = problem.contents.iter().map(|c| c.size_mb).collect();
    let mut best = solution;
    loop {
        let x = &best.allocation.x;
        let mut served = vec![false; problem.requesters.len()];
        let mut device_load = std::collections::BTreeMap::<usize, usize>::new();
        let mut band_used = [0.0f64; 2];
        for link in problem.links.iter().filter(|l| x[l.link_id]) {
            served[problem.requester_index(link.requester).expect("validated problem")] = true;
            band_used[usize::from(link.band() == Band::Uplink)] += link.y_min;
            if let Some(dev) = link.device() {
                *device_load.entry(dev).or_default() += 1;
            }
        }
        let mut improved = None;
        for link in &problem.links {
            let q = problem.requester_index(link.requester).expect("validated problem");
            let b = usize::from(link.band() == Band::Uplink);
            if served[q]
                || band_used[b] + link.y_min > problem.band_budget(link.band()) + FEAS_TOL
                || link.device().is_some_and(|d| device_load.get(&d).copied().unwrap_or(0) >= problem.unicast_limit)
            {
                continue;
            }
            let mut x = x.clone();
            x[link.link_id] = true;
            let z: Vec<bool> = (0..x.len()).map(|l| x[l] && z_value(problem, l) > 0.0).collect();
            let v = select_bs_cache(&sizes, &bs_cache_values(problem, &x), problem.bs_cache_capacity_mb);
            let trial = complete_allocation(problem, x, z, v)?;
            if trial.objective > best.objective + 1e-12 {
                improved = Some(trial);
                break;
            }
        }
        match improved {
            Some(s) => best = s,
            None => return Ok(best),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TxId;
    use crate::problem::fixtures::*;
    use crate::problem::{check_feasible, RequesterEntry};

    fn problem(links: Vec<crate::problem::CandidateLink>, reqs: &[(usize, usize)], n_contents: usize, bs_cap: f64) -> AllocationProblem {
        let reqs = reqs.iter().map(|&(node, content)| RequesterEntry { node, content }).collect();
        AllocationProblem::new(reqs, contents(n_contents, 1.0), links, bs_cap, 1.0).unwrap()
    }

    fn relaxed_x(p: &AllocationProblem, x: &[f64]) -> RelaxedAllocation {
        RelaxedAllocation { x: x.to_vec(), ..RelaxedAllocation::zeros(p) }
    }

    #[test]
    fn argmax_with_lowest_id_tie_break() {
        let p = problem(
            vec![link(0, TxId::Bs, 1, 0, 6.0, 0.2, 1.0), link(1, TxId::Device(4), 1, 0, 9.0, 0.2, 1.0)],
            &[(1, 0)],
            1,
            1.0,
        );
        let s = round_and_repair(&relaxed_x(&p, &[0.6, 0.6]), &p, 0.5).unwrap();
        assert_eq!(s.allocation.x, vec![true, false]);
        let s = round_and_repair(&relaxed_x(&p, &[0.55, 0.6]), &p, 0.5).unwrap();
        assert_eq!(s.allocation.x, vec![false, true]);
        let s = round_and_repair(&relaxed_x(&p, &[0.4, 0.3]), &p, 0.5).unwrap();
        assert_eq!(s.allocation.x, vec![false, false]);
    }

    #[test]
    fn unicast_keeps_largest_and_falls_back() {
        let p = problem(
            vec![
                link(0, TxId::Bs, 1, 0, 6.0, 0.2, 1.0),
                link(1, TxId::Device(4), 1, 0, 9.0, 0.2, 1.0),
                link(2, TxId::Device(4), 2, 0, 9.0, 0.2, 1.0),
                link(3, TxId::Bs, 2, 0, 5.0, 0.2, 1.0),
            ],
            &[(1, 0), (2, 0)],
            1,
            1.0,
        );
        let s = round_and_repair(&relaxed_x(&p, &[0.5, 0.9, 0.8, 0.5]), &p, 0.5).unwrap();
        assert_eq!(s.allocation.x, vec![false, true, false, true]);
        assert!(check_feasible(&p, &s.allocation).ok);
    }

    #[test]
    fn binary_feasible_input_is_kept() {
        let p = problem(
            vec![
                link(0, TxId::Bs, 1, 0, 6.0, 0.2, 1.0),
                link(1, TxId::Device(4), 2, 1, 9.0, 0.3, 1.0),
                link(2, TxId::Bs, 2, 1, 2.0, 0.2, 1.0),
            ],
            &[(1, 0), (2, 1)],
            2,
            2.0,
        );
        let s = round_and_repair(&relaxed_x(&p, &[1.0, 1.0, 0.0]), &p, 0.5).unwrap();
        assert_eq!(s.allocation.x, vec![true, true, false]);
        assert_eq!(s.allocation.z, vec![false, true, false]);
        assert_eq!(s.allocation.v, vec![true, false]);
    }

    #[test]
    fn bs_cache_matches_exhaustive_choice() {
        // Four requesters on four contents with distinct gains; room for two.
        let gains = [0.5, 2.0, -1.0, 1.2];
        let links = (0..4).map(|i| link(i, TxId::Bs, i + 1, i, 1.0, 0.1, gains[i])).collect();
        let p = problem(links, &[(1, 0), (2, 1), (3, 2), (4, 3)], 4, 2.0);
        let s = round_and_repair(&relaxed_x(&p, &[1.0; 4]), &p, 0.5).unwrap();
        let mut best = (f64::NEG_INFINITY, 0u32);
        for mask in 0u32..16 {
            if mask.count_ones() > 2 {
                continue;
            }
            let value: f64 = (0..4).filter(|b| mask >> b & 1 == 1).map(|b| p.links[b].terms.cache_gain()).sum();
            if value > best.0 {
                best = (value, mask);
            }
        }
        let expected: Vec<bool> = (0..4).map(|b| best.1 >> b & 1 == 1).collect();
        assert_eq!(s.allocation.v, expected);
    }

    #[test]
    fn band_overflow_is_skipped() {
        let p = problem(
            vec![
                link(0, TxId::Bs, 1, 0, 6.0, 0.6, 0.0),
                link(1, TxId::Bs, 2, 0, 5.0, 0.6, 0.0),
            ],
            &[(1, 0), (2, 0)],
            1,
            1.0,
        );
        let s = round_and_repair(&relaxed_x(&p, &[0.9, 0.8]), &p, 0.5).unwrap();
        assert_eq!(s.allocation.x, vec![true, false]);
        assert!(check_feasible(&p, &s.allocation).ok);
    }

    #[test]
    fn fill_adds_profitable_unserved_link() {
        let p = problem(
            vec![link(0, TxId::Bs, 1, 0, 6.0, 0.2, 1.0), link(1, TxId::Bs, 2, 1, 1.0, 0.3, 2.0), link(2, TxId::Bs, 3, 0, 30.0, 0.9, 1.0)],
            &[(1, 0), (2, 1), (3, 0)],
            2,
            2.0,
        );
        let rounded = round_and_repair(&relaxed_x(&p, &[1.0, 0.2, 0.0]), &p, 0.5).unwrap();
        assert_eq!(rounded.allocation.x, vec![true, false, false]);
        let filled = fill_unserved(&p, rounded.clone()).unwrap();
        // Link 1 adds its cache gain and leaves 0.5 of the band to link 0;
        // link 2 does not fit next to link 0.
        assert_eq!(filled.allocation.x, vec![true, true, false]);
        assert!(filled.objective > rounded.objective);
        assert!(check_feasible(&p, &filled.allocation).ok);
    }
}
