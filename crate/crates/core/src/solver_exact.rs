//! Centralized exact solver: depth-first branch and bound over per-requester
//! link choices, plus an exhaustive enumerator for tiny instances.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{
    check_feasible, complete_allocation, optimal_y_given_discrete, total_utility, Allocation, AllocationProblem,
    Band, Solution, FEAS_TOL,
};

/// Largest catalog for which BS cache contents are chosen by subset enumeration.
pub const EXACT_CACHE_MAX_CONTENTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactLimits {
    /// Search nodes before the search is truncated.
    pub max_nodes: Option<u64>,
    /// Wall-clock budget. Leave unset where results must be reproducible.
    pub time_budget_s: Option<f64>,
}

impl Default for ExactLimits {
    fn default() -> Self {
        Self { max_nodes: Some(2_000_000), time_budget_s: None }
    }
}

impl ExactLimits {
    pub fn unlimited() -> Self {
        Self { max_nodes: None, time_budget_s: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStatus {
    /// Search completed; the incumbent is optimal.
    Exact,
    /// Limits truncated the search; the incumbent is the best found.
    Bounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactOutcome {
    pub solution: Solution,
    pub status: SearchStatus,
    pub nodes: u64,
}

/// BS cache contents maximizing `sum_c V_c * value_c` within `capacity_mb`.
/// Only contents with positive value are considered. Exact by subset
/// enumeration up to [`EXACT_CACHE_MAX_CONTENTS`] contents, greedy by value
/// density beyond that.
pub fn select_bs_cache(sizes: &[f64], values: &[f64], capacity_mb: f64) -> Vec<bool> {
    let positive: Vec<usize> = (0..values.len()).filter(|&c| values[c] > 0.0).collect();
    let mut chosen = vec![false; values.len()];
    let total: f64 = positive.iter().map(|&c| sizes[c]).sum();
    if total <= capacity_mb + FEAS_TOL {
        positive.iter().for_each(|&c| chosen[c] = true);
        return chosen;
    }
    if values.len() > EXACT_CACHE_MAX_CONTENTS {
        return select_bs_cache_greedy(sizes, values, capacity_mb);
    }
    let mut best = (f64::NEG_INFINITY, 0u32);
    for mask in 0u32..(1 << positive.len()) {
        let (mut size, mut value) = (0.0, 0.0);
        for (bit, &c) in positive.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                size += sizes[c];
                value += values[c];
            }
        }
        if size <= capacity_mb + FEAS_TOL && value > best.0 {
            best = (value, mask);
        }
    }
    for (bit, &c) in positive.iter().enumerate() {
        chosen[c] = best.1 >> bit & 1 == 1;
    }
    chosen
}

/// Greedy by value per Mb; contents that no longer fit are skipped.
pub fn select_bs_cache_greedy(sizes: &[f64], values: &[f64], capacity_mb: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..values.len()).filter(|&c| values[c] > 0.0).collect();
    order.sort_by(|&a, &b| (values[b] / sizes[b]).total_cmp(&(values[a] / sizes[a])).then(a.cmp(&b)));
    let mut chosen = vec![false; values.len()];
    let mut used = 0.0;
    for c in order {
        if used + sizes[c] <= capacity_mb + FEAS_TOL {
            chosen[c] = true;
            used += sizes[c];
        }
    }
    chosen
}

/// Per-content value of BS caching given the assigned cellular links.
pub(crate) fn bs_cache_values(problem: &AllocationProblem, x: &[bool]) -> Vec<f64> {
    let mut values = vec![0.0; problem.contents.len()];
    for l in problem.links.iter().filter(|l| !l.is_d2d() && x[l.link_id]) {
        values[l.content] += l.terms.cache_gain();
    }
    values
}

/// Value of requester-side caching on a D2D link when it is assigned.
pub(crate) fn z_value(problem: &AllocationProblem, link: usize) -> f64 {
    let l = &problem.links[link];
    if l.is_d2d() && problem.device_can_cache(l) {
        l.terms.cache_gain().max(0.0)
    } else {
        0.0
    }
}

/// Best caching decisions for fixed assignments.
pub(crate) fn best_caching(problem: &AllocationProblem, x: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let z = (0..problem.links.len()).map(|l| x[l] && z_value(problem, l) > 0.0).collect();
    let sizes: Vec<f64> = problem.contents.iter().map(|c| c.size_mb).collect();
    let v = select_bs_cache(&sizes, &bs_cache_values(problem, x), problem.bs_cache_capacity_mb);
    (z, v)
}

struct Search<'a> {
    problem: &'a AllocationProblem,
    order: Vec<usize>,
    options: Vec<Vec<usize>>,
    suffix_r: Vec<[f64; 2]>,
    sizes: Vec<f64>,
    counts: Vec<f64>,
    choice: Vec<Option<usize>>,
    device_used: Vec<bool>,
    best_value: f64,
    best_choice: Vec<Option<usize>>,
    nodes: u64,
    truncated: bool,
    limits: ExactLimits,
    started: Instant,
}

#[derive(Clone, Copy)]
struct Partial {
    used: [f64; 2],
    max_r: [f64; 2],
    ymin_r: [f64; 2],
    any: [bool; 2],
    z_part: f64,
}

fn band_idx(b: Band) -> usize {
    match b {
        Band::Downlink => 0,
        Band::Uplink => 1,
    }
}

impl<'a> Search<'a> {
    fn new(problem: &'a AllocationProblem, limits: ExactLimits) -> Self {
        let by_req = problem.links_by_requester();
        let optimistic = |l: usize| -> f64 {
            let link = &problem.links[l];
            if link.is_d2d() {
                z_value(problem, l)
            } else {
                link.terms.cache_gain().max(0.0)
            }
        };
        // Most spectrum-efficient requesters first.
        let best_r = |q: usize| {
            by_req[q]
                .iter()
                .map(|&l| {
                    let link = &problem.links[l];
                    (optimistic(l) + link.terms.r * link.y_min) / link.y_min.max(1e-12)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let mut order: Vec<usize> = (0..problem.requesters.len()).filter(|&q| !by_req[q].is_empty()).collect();
        order.sort_by(|&a, &b| best_r(b).total_cmp(&best_r(a)).then(a.cmp(&b)));

        let options: Vec<Vec<usize>> = order
            .iter()
            .map(|&q| {
                let mut opts = by_req[q].clone();
                let score = |l: usize| problem.links[l].terms.r.max(0.0) + optimistic(l);
                opts.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
                opts
            })
            .collect();

        let n = order.len();
        let nc = problem.contents.len();
        let mut suffix_r = vec![[f64::NEG_INFINITY; 2]; n + 1];
        for k in (0..n).rev() {
            let opts = &options[k];
            suffix_r[k] = suffix_r[k + 1];
            for &l in opts {
                let b = band_idx(problem.links[l].band());
                suffix_r[k][b] = suffix_r[k][b].max(problem.links[l].terms.r);
            }
        }
        let max_node = problem.links.iter().filter_map(|l| l.device()).max().map_or(0, |m| m + 1);
        Self {
            problem,
            order,
            options,
            suffix_r,
            sizes: problem.contents.iter().map(|c| c.size_mb).collect(),
            counts: vec![0.0; nc],
            choice: vec![None; problem.requesters.len()],
            device_used: vec![false; max_node],
            best_value: f64::NEG_INFINITY,
            best_choice: vec![None; problem.requesters.len()],
            nodes: 0,
            truncated: false,
            limits,
            started: Instant::now(),
        }
    }

    fn out_of_budget(&mut self) -> bool {
        if self.truncated {
            return true;
        }
        if self.limits.max_nodes.is_some_and(|m| self.nodes >= m) {
            self.truncated = true;
        } else if let Some(t) = self.limits.time_budget_s {
            if self.nodes.is_multiple_of(1024) && self.started.elapsed().as_secs_f64() > t {
                self.truncated = true;
            }
        }
        self.truncated
    }

    /// Option value ignoring spectrum: requester caching for D2D links, the
    /// BS caching share for cellular ones.
    fn option_value(&self, l: usize) -> f64 {
        let link = &self.problem.links[l];
        if link.is_d2d() {
            z_value(self.problem, l)
        } else {
            link.terms.cache_gain().max(0.0)
        }
    }

    /// Band prices at which the remaining options first overfill each band.
    fn critical_prices(&self, pos: usize, p: &Partial) -> [f64; 2] {
        let mut prices = [0.0; 2];
        for (b, price) in prices.iter_mut().enumerate() {
            let mut items: Vec<(f64, f64)> = self.options[pos..]
                .iter()
                .filter_map(|opts| {
                    opts.iter()
                        .filter(|&&l| band_idx(self.problem.links[l].band()) == b)
                        .map(|&l| (self.option_value(l), self.problem.links[l].y_min.max(1e-12)))
                        .max_by(|x, y| (x.0 / x.1).total_cmp(&(y.0 / y.1)))
                })
                .collect();
            items.sort_by(|x, y| (y.0 / y.1).total_cmp(&(x.0 / x.1)));
            let mut room = self.room(b, p);
            for (v, w) in items {
                if w > room {
                    *price = v / w;
                    break;
                }
                room -= w;
            }
        }
        prices
    }

    fn room(&self, b: usize, p: &Partial) -> f64 {
        let band = if b == 0 { Band::Downlink } else { Band::Uplink };
        (self.problem.band_budget(band) - p.used[b]).max(0.0)
    }

    /// Upper bound on any completion, with band budgets relaxed at `prices`.
    fn bound_at(&self, pos: usize, p: &Partial, prices: [f64; 2]) -> f64 {
        let mut ub = p.z_part;
        for (b, price) in prices.iter().enumerate() {
            // Spectrum not yet reserved is worth at most the best remaining rate.
            let best_r = p.max_r[b].max(self.suffix_r[pos][b]).max(0.0);
            ub += p.ymin_r[b] + (best_r + price) * self.room(b, p);
        }
        let mut pot: Vec<f64> = self.counts.iter().map(|c| c.max(0.0)).collect();
        for (k, opts) in self.options.iter().enumerate().skip(pos) {
            let (mut zb, mut gb) = (0.0f64, 0.0f64);
            for &l in opts {
                let link = &self.problem.links[l];
                let v = self.option_value(l) - prices[band_idx(link.band())] * link.y_min;
                if link.is_d2d() {
                    zb = zb.max(v);
                } else {
                    gb = gb.max(v);
                }
            }
            ub += zb;
            pot[self.problem.requesters[self.order[k]].content] += (gb - zb).max(0.0);
        }
        // Fractional knapsack over the BS cache.
        let mut items: Vec<(f64, f64)> =
            pot.into_iter().zip(self.sizes.iter().copied()).filter(|(v, _)| *v > 0.0).collect();
        items.sort_by(|a, b| (b.0 / b.1).total_cmp(&(a.0 / a.1)));
        let mut room = self.problem.bs_cache_capacity_mb + FEAS_TOL;
        for (value, size) in items {
            if size <= room {
                ub += value;
                room -= size;
            } else {
                ub += value * (room / size).max(0.0);
                break;
            }
        }
        ub
    }

    fn bound(&self, pos: usize, p: &Partial) -> f64 {
        let crit = self.critical_prices(pos, p);
        let mut ub = self.bound_at(pos, p, [0.0; 2]);
        for prices in [crit, [crit[0], 0.0], [0.0, crit[1]]] {
            if prices != [0.0; 2] {
                ub = ub.min(self.bound_at(pos, p, prices));
            }
        }
        ub
    }

    fn leaf_value(&self, p: &Partial) -> f64 {
        let mut value = p.z_part;
        for b in 0..2 {
            if p.any[b] {
                value += p.ymin_r[b] + (1.0 - p.used[b]).max(0.0) * p.max_r[b].max(0.0);
            }
        }
        let v = select_bs_cache(&self.sizes, &self.counts, self.problem.bs_cache_capacity_mb);
        value + v.iter().zip(&self.counts).filter(|(on, _)| **on).map(|(_, val)| val).sum::<f64>()
    }

    fn dfs(&mut self, pos: usize, p: Partial) {
        self.nodes += 1;
        if self.out_of_budget() {
            return;
        }
        if pos == self.order.len() {
            let value = self.leaf_value(&p);
            if value > self.best_value + 1e-12 {
                self.best_value = value;
                self.best_choice.clone_from(&self.choice);
            }
            return;
        }
        if self.bound(pos, &p) <= self.best_value + 1e-12 {
            return;
        }
        let q = self.order[pos];
        for k in 0..self.options[pos].len() {
            let l = self.options[pos][k];
            let link = &self.problem.links[l];
            let b = band_idx(link.band());
            if p.used[b] + link.y_min > self.problem.band_budget(link.band()) + FEAS_TOL {
                continue;
            }
            if let Some(dev) = link.device() {
                if self.device_used[dev] {
                    continue;
                }
                self.device_used[dev] = true;
            }
            let mut next = p;
            next.used[b] += link.y_min;
            next.ymin_r[b] += link.y_min * link.terms.r;
            next.max_r[b] = next.max_r[b].max(link.terms.r);
            next.any[b] = true;
            let gain = if link.is_d2d() {
                next.z_part += z_value(self.problem, l);
                0.0
            } else {
                link.terms.cache_gain()
            };
            self.counts[link.content] += gain;
            self.choice[q] = Some(l);
            self.dfs(pos + 1, next);
            self.choice[q] = None;
            self.counts[link.content] -= gain;
            if let Some(dev) = link.device() {
                self.device_used[dev] = false;
            }
            if self.truncated {
                return;
            }
        }
        self.dfs(pos + 1, p);
    }
}

/// Maximizes total utility over assignments, requester caching and BS caching.
pub fn solve_exact(problem: &AllocationProblem, limits: ExactLimits) -> Result<ExactOutcome> {
    let mut search = Search::new(problem, limits);
    let root = Partial {
        used: [0.0; 2],
        max_r: [f64::NEG_INFINITY; 2],
        ymin_r: [0.0; 2],
        any: [false; 2],
        z_part: 0.0,
    };
    search.dfs(0, root);

    let mut x = vec![false; problem.links.len()];
    for l in search.best_choice.iter().flatten() {
        x[*l] = true;
    }
    let (z, v) = best_caching(problem, &x);
    let solution = complete_allocation(problem, x, z, v)?;
    let status = if search.truncated { SearchStatus::Bounded } else { SearchStatus::Exact };
    Ok(ExactOutcome { solution, status, nodes: search.nodes })
}

pub const BRUTE_MAX_REQUESTERS: usize = 4;
pub const BRUTE_MAX_LINKS: usize = 12;
pub const BRUTE_MAX_CONTENTS: usize = 4;

/// Enumerates every binary `(x, z, V)` with the exact spectrum split and
/// returns the best feasible allocation.
pub fn brute_force_tiny(problem: &AllocationProblem) -> Result<Solution> {
    let (nr, nl, nc) = (problem.requesters.len(), problem.links.len(), problem.contents.len());
    if nr > BRUTE_MAX_REQUESTERS || nl > BRUTE_MAX_LINKS || nc > BRUTE_MAX_CONTENTS {
        return Err(Error::TooLarge(format!(
            "{nr} requesters, {nl} links, {nc} contents (caps {BRUTE_MAX_REQUESTERS}/{BRUTE_MAX_LINKS}/{BRUTE_MAX_CONTENTS})"
        )));
    }
    let mut best = Solution { allocation: Allocation::zeros(problem), objective: 0.0 };
    let mut found = false;
    for xmask in 0u32..(1 << nl) {
        let x: Vec<bool> = (0..nl).map(|l| xmask >> l & 1 == 1).collect();
        let y = match optimal_y_given_discrete(problem, &x) {
            Ok(y) => y,
            Err(Error::InfeasibleRate { .. }) => continue,
            Err(e) => return Err(e),
        };
        let d2d: Vec<usize> = (0..nl).filter(|&l| x[l] && problem.links[l].is_d2d()).collect();
        for zmask in 0u32..(1 << d2d.len()) {
            let mut z = vec![false; nl];
            for (bit, &l) in d2d.iter().enumerate() {
                z[l] = zmask >> bit & 1 == 1;
            }
            for vmask in 0u32..(1 << nc) {
                let v: Vec<bool> = (0..nc).map(|c| vmask >> c & 1 == 1).collect();
                let allocation = Allocation { x: x.clone(), y: y.clone(), z: z.clone(), v };
                if !check_feasible(problem, &allocation).ok {
                    continue;
                }
                let objective = total_utility(problem, &allocation)?;
                if !found || objective > best.objective + 1e-12 {
                    best = Solution { allocation, objective };
                    found = true;
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TxId;
    use crate::problem::fixtures::*;
    use crate::problem::{CandidateLink, RequesterEntry};
    use approx::assert_abs_diff_eq;

    fn single_cellular() -> AllocationProblem {
        let links = vec![CandidateLink {
            link_id: 0,
            transmitter: TxId::Bs,
            requester: 0,
            content: 0,
            full_band_rate_bps: 10e6,
            terms: terms(crate::economy::LinkKind::Cellular, 6.0, 3.0, 0.1),
            y_min: 0.2,
        }];
        AllocationProblem::new(vec![RequesterEntry { node: 0, content: 0 }], contents(1, 2.0), links, 2.0, 2.0).unwrap()
    }

    #[test]
    fn single_link_closed_form() {
        let p = single_cellular();
        let out = solve_exact(&p, ExactLimits::default()).unwrap();
        assert_eq!(out.status, SearchStatus::Exact);
        let a = &out.solution.allocation;
        assert!(a.x[0] && a.v[0]);
        assert_abs_diff_eq!(a.y[0], 1.0);
        assert_abs_diff_eq!(out.solution.objective, 6.0 + (3.0 - 0.1), epsilon = 1e-12);
        let brute = brute_force_tiny(&p).unwrap();
        assert_eq!(brute.allocation, out.solution.allocation);
        assert_abs_diff_eq!(brute.objective, out.solution.objective, epsilon = 1e-12);
    }

    #[test]
    fn empty_problem() {
        let p = AllocationProblem::new(vec![], contents(2, 1.0), vec![], 2.0, 1.0).unwrap();
        assert_eq!(solve_exact(&p, ExactLimits::default()).unwrap().solution.objective, 0.0);
        assert_eq!(brute_force_tiny(&p).unwrap().objective, 0.0);
    }

    #[test]
    fn nonpositive_gains_give_empty_allocation() {
        let requesters = vec![RequesterEntry { node: 0, content: 0 }, RequesterEntry { node: 1, content: 1 }];
        let links = vec![
            link(0, TxId::Bs, 0, 0, 0.0, 0.3, -1.0),
            link(1, TxId::Device(7), 0, 0, 0.0, 0.3, -2.0),
            link(2, TxId::Bs, 1, 1, 0.0, 0.3, -0.5),
        ];
        let p = AllocationProblem::new(requesters, contents(2, 1.0), links, 2.0, 1.0).unwrap();
        let b = brute_force_tiny(&p).unwrap();
        assert_eq!(b.objective, 0.0);
        assert!(!b.allocation.z.iter().any(|&z| z) && !b.allocation.v.iter().any(|&v| v));
        assert_abs_diff_eq!(solve_exact(&p, ExactLimits::default()).unwrap().solution.objective, 0.0);
    }

    #[test]
    fn brute_force_caps() {
        let requesters: Vec<_> = (0..5).map(|n| RequesterEntry { node: n, content: 0 }).collect();
        let links = (0..5).map(|i| link(i, TxId::Bs, i, 0, 1.0, 0.1, 1.0)).collect();
        let p = AllocationProblem::new(requesters, contents(1, 1.0), links, 1.0, 1.0).unwrap();
        assert!(matches!(brute_force_tiny(&p), Err(Error::TooLarge(_))));
    }

    #[test]
    fn cache_selection_matches_enumeration() {
        let sizes = [1.0, 2.0, 1.5, 1.0];
        let values = [3.0, 5.0, -1.0, 2.5];
        let pick = select_bs_cache(&sizes, &values, 3.0);
        assert_eq!(pick, vec![true, true, false, false]);
        assert_eq!(select_bs_cache(&sizes, &values, 10.0), vec![true, true, false, true]);
        // Equal sizes: greedy and exact agree.
        let eq = [1.0; 4];
        assert_eq!(select_bs_cache_greedy(&eq, &values, 2.0), select_bs_cache(&eq, &values, 2.0));
    }

    #[test]
    fn truncated_search_is_flagged() {
        let requesters: Vec<_> = (0..4).map(|n| RequesterEntry { node: n, content: 0 }).collect();
        let links = (0..4).map(|i| link(i, TxId::Bs, i, 0, 1.0 + i as f64, 0.1, 1.0)).collect();
        let p = AllocationProblem::new(requesters, contents(1, 1.0), links, 1.0, 1.0).unwrap();
        let out = solve_exact(&p, ExactLimits { max_nodes: Some(2), time_budget_s: None }).unwrap();
        assert_eq!(out.status, SearchStatus::Bounded);
        assert!(check_feasible(&p, &out.solution.allocation).ok);
    }

    #[test]
    fn unicast_and_budget_respected() {
        // Two requesters share one strong transmitter; the DL band fits only one requester.
        let requesters = vec![RequesterEntry { node: 0, content: 0 }, RequesterEntry { node: 1, content: 0 }];
        let links = vec![
            link(0, TxId::Bs, 0, 0, 5.0, 0.7, 1.0),
            link(1, TxId::Device(9), 0, 0, 20.0, 0.1, 4.0),
            link(2, TxId::Bs, 1, 0, 5.0, 0.7, 1.0),
            link(3, TxId::Device(9), 1, 0, 20.0, 0.1, 4.0),
        ];
        let p = AllocationProblem::new(requesters, contents(1, 1.0), links, 1.0, 1.0).unwrap();
        let e = solve_exact(&p, ExactLimits::default()).unwrap();
        let b = brute_force_tiny(&p).unwrap();
        assert!(check_feasible(&p, &e.solution.allocation).ok);
        assert_abs_diff_eq!(e.solution.objective, b.objective, epsilon = 1e-9);
        assert_eq!(e.solution.allocation.served_requesters(), 2);
    }
}
