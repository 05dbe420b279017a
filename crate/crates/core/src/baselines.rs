//! Ablations solved with the same ADMM machinery: no new caching decisions,
//! and cellular-only delivery.

use crate::admm::{solve_admm, AdmmConfig};
use crate::error::Result;
use crate::problem::{total_utility, Allocation, AllocationProblem, CandidateLink, Solution};

/// D2D delivery stays available but every caching coefficient is zeroed, so
/// `z` and `V` end up all zero.
pub fn solve_no_caching(problem: &AllocationProblem, config: &AdmmConfig) -> Result<Solution> {
    let mut reduced = problem.clone();
    for l in &mut reduced.links {
        l.terms = l.terms.without_caching();
    }
    let out = solve_admm(&reduced, config)?;
    let mut allocation = out.solution.allocation;
    allocation.z.iter_mut().for_each(|z| *z = false);
    allocation.v.iter_mut().for_each(|v| *v = false);
    let objective = total_utility(problem, &allocation)?;
    Ok(Solution { allocation, objective })
}

/// Drops every D2D candidate and solves the remaining cellular problem;
/// the allocation is reported on the original link ids.
pub fn solve_no_d2d(problem: &AllocationProblem, config: &AdmmConfig) -> Result<Solution> {
    let kept: Vec<usize> = problem.links.iter().filter(|l| !l.is_d2d()).map(|l| l.link_id).collect();
    let links: Vec<CandidateLink> = kept
        .iter()
        .enumerate()
        .map(|(i, &l)| CandidateLink { link_id: i, ..problem.links[l].clone() })
        .collect();
    let reduced = AllocationProblem { links, ..problem.clone() };
    let out = solve_admm(&reduced, config)?;
    let mut allocation = Allocation::zeros(problem);
    for (i, &l) in kept.iter().enumerate() {
        allocation.x[l] = out.solution.allocation.x[i];
        allocation.y[l] = out.solution.allocation.y[i];
    }
    allocation.v = out.solution.allocation.v;
    let objective = total_utility(problem, &allocation)?;
    Ok(Solution { allocation, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TxId;
    use crate::problem::fixtures::*;
    use crate::problem::{check_feasible, RequesterEntry};
    use crate::solver_exact::{brute_force_tiny, solve_exact, ExactLimits};

    fn problem(links: Vec<CandidateLink>, reqs: &[(usize, usize)], n_contents: usize) -> AllocationProblem {
        let reqs = reqs.iter().map(|&(node, content)| RequesterEntry { node, content }).collect();
        AllocationProblem::new(reqs, contents(n_contents, 1.0), links, 1.0, 1.0).unwrap()
    }

    #[test]
    fn no_caching_is_vacuous_without_cache_gains() {
        let mut p = problem(
            vec![
                link(0, TxId::Bs, 1, 0, 6.0, 0.2, 0.0),
                link(1, TxId::Device(4), 1, 0, 9.0, 0.2, 0.0),
                link(2, TxId::Bs, 2, 1, 3.0, 0.2, 0.0),
            ],
            &[(1, 0), (2, 1)],
            2,
        );
        for l in &mut p.links {
            l.terms = l.terms.without_caching();
        }
        let cfg = AdmmConfig::default();
        let a = solve_no_caching(&p, &cfg).unwrap();
        let b = solve_admm(&p, &cfg).unwrap().solution;
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn no_caching_loses_a_positive_cache_gain() {
        let p = problem(vec![link(0, TxId::Bs, 1, 0, 6.0, 0.2, 2.5)], &[(1, 0)], 1);
        let cfg = AdmmConfig::default();
        let full = solve_admm(&p, &cfg).unwrap().solution.objective;
        let ablated = solve_no_caching(&p, &cfg).unwrap();
        assert!(ablated.objective < full - 1.0);
        assert!(ablated.objective <= solve_exact(&p, ExactLimits::default()).unwrap().solution.objective + 1e-9);
        assert!(ablated.allocation.v.iter().all(|v| !v));
    }

    #[test]
    fn no_d2d_equals_admm_without_d2d_candidates() {
        let p = problem(
            vec![link(0, TxId::Bs, 1, 0, 6.0, 0.2, 1.0), link(1, TxId::Bs, 2, 1, 3.0, 0.3, 0.5)],
            &[(1, 0), (2, 1)],
            2,
        );
        let cfg = AdmmConfig::default();
        assert_eq!(solve_no_d2d(&p, &cfg).unwrap(), solve_admm(&p, &cfg).unwrap().solution);
    }

    #[test]
    fn saturated_downlink_leaves_requesters_to_d2d() {
        // Each cellular link needs 60% of the downlink, so only one fits.
        let p = problem(
            vec![
                link(0, TxId::Bs, 1, 0, 6.0, 0.6, 0.0),
                link(1, TxId::Bs, 2, 0, 6.0, 0.6, 0.0),
                link(2, TxId::Device(5), 2, 0, 8.0, 0.3, 0.0),
            ],
            &[(1, 0), (2, 0)],
            1,
        );
        let cfg = AdmmConfig::default();
        let ablated = solve_no_d2d(&p, &cfg).unwrap();
        assert!(check_feasible(&p, &ablated.allocation).ok);
        assert_eq!(ablated.allocation.served_requesters(), 1);
        let brute = brute_force_tiny(&p).unwrap();
        assert_eq!(brute.allocation.served_requesters(), 2);
        assert!(ablated.objective <= brute.objective + 1e-9);
    }
}
