//! The per-interval allocation problem: candidate links, utility evaluation,
//! feasibility checking and the exact spectrum split for fixed binaries.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::channel::{full_band_rate, ChannelSamples, NoiseModel, TxId};
use crate::economy::{link_terms, link_utility, LinkKind, LinkTerms, PopularityEstimate};
use crate::error::{Error, Result};
use crate::scenario::{CacheState, Content, DemandSet, Role, Scenario};

/// Feasibility slack used by the checker and the inner solve.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Band {
    /// Cellular links share the BS downlink band.
    Downlink,
    /// D2D links share the uplink band.
    Uplink,
}

impl Band {
    pub fn name(self) -> &'static str {
        match self {
            Band::Downlink => "downlink",
            Band::Uplink => "uplink",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateLink {
    pub link_id: usize,
    pub transmitter: TxId,
    /// Node id of the requester.
    pub requester: usize,
    pub content: usize,
    pub full_band_rate_bps: f64,
    pub terms: LinkTerms,
    /// Smallest spectrum fraction meeting the rate requirement.
    pub y_min: f64,
}

impl CandidateLink {
    pub fn kind(&self) -> LinkKind {
        self.terms.link_kind
    }

    pub fn band(&self) -> Band {
        match self.kind() {
            LinkKind::Cellular => Band::Downlink,
            LinkKind::D2D => Band::Uplink,
        }
    }

    pub fn is_d2d(&self) -> bool {
        self.kind() == LinkKind::D2D
    }

    pub fn device(&self) -> Option<usize> {
        match self.transmitter {
            TxId::Bs => None,
            TxId::Device(n) => Some(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequesterEntry {
    pub node: usize,
    pub content: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub links: Vec<CandidateLink>,
    /// Sorted by node id.
    pub requesters: Vec<RequesterEntry>,
    pub contents: Vec<Content>,
    pub band_budget_dl: f64,
    pub band_budget_ul: f64,
    pub bs_cache_capacity_mb: f64,
    pub per_device_capacity_mb: f64,
    pub unicast_limit: usize,
}

impl AllocationProblem {
    /// Validates and assembles a problem. Link ids must be `0..links.len()` in order.
    pub fn new(
        mut requesters: Vec<RequesterEntry>,
        contents: Vec<Content>,
        links: Vec<CandidateLink>,
        bs_cache_capacity_mb: f64,
        per_device_capacity_mb: f64,
    ) -> Result<Self> {
        requesters.sort_by_key(|r| r.node);
        if requesters.windows(2).any(|w| w[0].node == w[1].node) {
            return Err(Error::InconsistentInput("duplicate requester".into()));
        }
        for (i, c) in contents.iter().enumerate() {
            if c.id != i || !(c.size_mb > 0.0) {
                return Err(Error::InconsistentInput(format!("content {i} is malformed")));
            }
        }
        let problem = Self {
            links,
            requesters,
            contents,
            band_budget_dl: 1.0,
            band_budget_ul: 1.0,
            bs_cache_capacity_mb,
            per_device_capacity_mb,
            unicast_limit: 1,
        };
        for (i, l) in problem.links.iter().enumerate() {
            if l.link_id != i {
                return Err(Error::InconsistentInput(format!("link at index {i} has id {}", l.link_id)));
            }
            let q = problem
                .requester_index(l.requester)
                .ok_or_else(|| Error::InconsistentInput(format!("link {i} targets unknown requester {}", l.requester)))?;
            if problem.requesters[q].content != l.content || l.content >= problem.contents.len() {
                return Err(Error::InconsistentInput(format!("link {i} carries the wrong content")));
            }
            if !(l.y_min > 0.0 && l.y_min <= 1.0) {
                return Err(Error::InconsistentInput(format!("link {i} has y_min {} outside (0, 1]", l.y_min)));
            }
            let kind_ok = matches!(
                (l.transmitter, l.kind()),
                (TxId::Bs, LinkKind::Cellular) | (TxId::Device(_), LinkKind::D2D)
            );
            if !kind_ok || !l.terms.r.is_finite() {
                return Err(Error::InconsistentInput(format!("link {i} is malformed")));
            }
        }
        for r in &problem.requesters {
            if r.content >= problem.contents.len() {
                return Err(Error::InconsistentInput(format!("requester {} demands unknown content", r.node)));
            }
        }
        Ok(problem)
    }

    pub fn requester_index(&self, node: usize) -> Option<usize> {
        self.requesters.binary_search_by_key(&node, |r| r.node).ok()
    }

    /// Link ids grouped by requester index.
    pub fn links_by_requester(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.requesters.len()];
        for l in &self.links {
            if let Some(q) = self.requester_index(l.requester) {
                out[q].push(l.link_id);
            }
        }
        out
    }

    /// Distinct D2D transmitter node ids appearing in the candidate set, ascending.
    pub fn d2d_transmitters(&self) -> Vec<usize> {
        self.links.iter().filter_map(CandidateLink::device).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn band_budget(&self, band: Band) -> f64 {
        match band {
            Band::Downlink => self.band_budget_dl,
            Band::Uplink => self.band_budget_ul,
        }
    }

    /// Net BS caching gain of a content (same for every cellular link carrying it).
    pub fn bs_cache_gain(&self, content: usize) -> Option<f64> {
        self.links.iter().find(|l| l.content == content && !l.is_d2d()).map(|l| l.terms.cache_gain())
    }

    /// Whether a requester may store the content it receives.
    pub fn device_can_cache(&self, link: &CandidateLink) -> bool {
        self.contents[link.content].size_mb <= self.per_device_capacity_mb + FEAS_TOL
    }
}

/// Decision variables; `x`, `y`, `z` are indexed by link id and `v` by content id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub x: Vec<bool>,
    pub y: Vec<f64>,
    pub z: Vec<bool>,
    #[serde(rename = "V")]
    pub v: Vec<bool>,
}

impl Allocation {
    pub fn zeros(problem: &AllocationProblem) -> Self {
        let n = problem.links.len();
        Self { x: vec![false; n], y: vec![0.0; n], z: vec![false; n], v: vec![false; problem.contents.len()] }
    }

    fn shape_error(&self, problem: &AllocationProblem) -> Option<String> {
        let n = problem.links.len();
        if self.x.len() != n || self.y.len() != n || self.z.len() != n {
            return Some(format!(
                "expected {n} link entries, got x={} y={} z={}",
                self.x.len(),
                self.y.len(),
                self.z.len()
            ));
        }
        if self.v.len() != problem.contents.len() {
            return Some(format!("expected {} content entries, got {}", problem.contents.len(), self.v.len()));
        }
        None
    }

    pub fn served_requesters(&self) -> usize {
        self.x.iter().filter(|&&b| b).count()
    }

    pub fn d2d_links_used(&self, problem: &AllocationProblem) -> usize {
        problem.links.iter().filter(|l| l.is_d2d() && self.x[l.link_id]).count()
    }
}

/// A feasible allocation together with its utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub allocation: Allocation,
    pub objective: f64,
}

/// Assembles the candidate links of one interval. Every requester gets a
/// cellular candidate and one D2D candidate per in-range transmitter holding
/// its content; links that cannot meet the rate requirement on the whole band
/// are dropped.
pub fn build_problem(
    scenario: &Scenario,
    cache_state: &CacheState,
    demands: &DemandSet,
    channel: &ChannelSamples,
    estimate: &PopularityEstimate,
) -> Result<AllocationProblem> {
    let cfg = &scenario.config;
    let noise = NoiseModel { psd_dbm_hz: cfg.noise_psd_dbm_hz, noise_figure_db: cfg.noise_figure_db };
    if estimate.q_hat.len() != scenario.contents.len() {
        return Err(Error::InconsistentInput("popularity estimate does not match the catalog".into()));
    }
    let num_requesters = scenario.num_requesters();
    let rate_req_bps = cfg.rate_req_mbps * 1.0e6;
    let mut requesters = Vec::with_capacity(demands.len());
    let mut links = Vec::new();

    for (&node_id, &content_id) in &demands.demands {
        let node = scenario
            .nodes
            .get(node_id)
            .filter(|n| n.role == Role::Requester)
            .ok_or_else(|| Error::InconsistentInput(format!("demand from unknown requester {node_id}")))?;
        let content = scenario
            .contents
            .get(content_id)
            .ok_or_else(|| Error::InconsistentInput(format!("demand for unknown content {content_id}")))?;
        requesters.push(RequesterEntry { node: node_id, content: content_id });

        let mut push = |tx: TxId, rate: f64, kind: LinkKind| {
            let y_min = rate_req_bps / rate;
            if rate > 0.0 && y_min <= 1.0 {
                links.push(CandidateLink {
                    link_id: links.len(),
                    transmitter: tx,
                    requester: node_id,
                    content: content_id,
                    full_band_rate_bps: rate,
                    terms: link_terms(kind, rate, content, estimate, num_requesters, &cfg.prices),
                    y_min,
                });
            }
        };

        let bs_gain = channel
            .get(TxId::Bs, node_id)
            .ok_or_else(|| Error::InconsistentInput(format!("no cellular channel sample for requester {node_id}")))?;
        push(TxId::Bs, full_band_rate(cfg.tx_power_bs_dbm, bs_gain, cfg.bw_dl_hz, &noise)?, LinkKind::Cellular);

        for tx in scenario.transmitters() {
            if !cache_state.device_holds(tx.id, content_id) || tx.distance_to(node) > cfg.d2d_max_distance_m {
                continue;
            }
            let gain = channel.get(TxId::Device(tx.id), node_id).ok_or_else(|| {
                Error::InconsistentInput(format!("no D2D channel sample for {} -> {node_id}", tx.id))
            })?;
            push(TxId::Device(tx.id), full_band_rate(cfg.tx_power_d2d_dbm, gain, cfg.bw_ul_hz, &noise)?, LinkKind::D2D);
        }
    }

    AllocationProblem::new(
        requesters,
        scenario.contents.clone(),
        links,
        cfg.bs_cache_capacity_mb(),
        cfg.device_cache_capacity_mb(),
    )
}

/// Sum of link utilities; the BS caching term counts once per assigned
/// cellular link whose content has `V = 1`.
pub fn total_utility(problem: &AllocationProblem, allocation: &Allocation) -> Result<f64> {
    if let Some(msg) = allocation.shape_error(problem) {
        return Err(Error::ShapeMismatch(msg));
    }
    let mut total = 0.0;
    for l in &problem.links {
        let i = l.link_id;
        let (z, v) = match l.kind() {
            LinkKind::D2D => (allocation.z[i], false),
            LinkKind::Cellular => (allocation.z[i], allocation.x[i] && allocation.v[l.content]),
        };
        total += link_utility(allocation.y[i], z, v, &l.terms)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn has(&self, kind: &str) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// Lists every violated allocation constraint.
pub fn check_feasible(problem: &AllocationProblem, allocation: &Allocation) -> FeasibilityReport {
    let mut violations = Vec::new();
    let mut flag = |kind: &str, detail: String| violations.push(Violation { kind: kind.to_string(), detail });

    if let Some(msg) = allocation.shape_error(problem) {
        flag("shape-mismatch", msg);
        return FeasibilityReport { ok: false, violations };
    }

    let mut per_requester = vec![0usize; problem.requesters.len()];
    let mut per_device: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut cached_mb = vec![0.0; problem.requesters.len()];
    let mut band_sum = [0.0f64; 2];

    for l in &problem.links {
        let i = l.link_id;
        let (x, y, z) = (allocation.x[i], allocation.y[i], allocation.z[i]);
        if !(0.0..=1.0).contains(&y) {
            flag("y-range", format!("link {i}: y = {y}"));
        }
        if y > 0.0 && !x {
            flag("y-without-assignment", format!("link {i}: y = {y} with x = 0"));
        }
        if z && !l.is_d2d() {
            flag("z-on-cellular", format!("link {i}"));
        }
        if z && !x {
            flag("z-without-assignment", format!("link {i}"));
        }
        if x && y + FEAS_TOL < l.y_min {
            flag("rate-requirement", format!("link {i}: y = {y} < y_min = {}", l.y_min));
        }
        let q = problem.requester_index(l.requester).expect("validated");
        if x {
            per_requester[q] += 1;
            if let Some(dev) = l.device() {
                *per_device.entry(dev).or_default() += 1;
            }
        }
        if z && l.is_d2d() {
            cached_mb[q] += problem.contents[l.content].size_mb;
        }
        if y.is_finite() {
            band_sum[usize::from(l.is_d2d())] += y;
        }
    }

    for (q, &count) in per_requester.iter().enumerate() {
        if count > 1 {
            flag("requester-multi-assignment", format!("requester {} has {count} links", problem.requesters[q].node));
        }
        if cached_mb[q] > problem.per_device_capacity_mb + FEAS_TOL {
            flag(
                "device-cache-capacity",
                format!("requester {} caches {} Mb > {}", problem.requesters[q].node, cached_mb[q], problem.per_device_capacity_mb),
            );
        }
    }
    for (dev, count) in per_device {
        if count > problem.unicast_limit {
            flag("unicast", format!("transmitter {dev} serves {count} requesters"));
        }
    }
    if band_sum[0] > problem.band_budget_dl + FEAS_TOL {
        flag("dl-band-budget", format!("sum of y = {} > {}", band_sum[0], problem.band_budget_dl));
    }
    if band_sum[1] > problem.band_budget_ul + FEAS_TOL {
        flag("ul-band-budget", format!("sum of y = {} > {}", band_sum[1], problem.band_budget_ul));
    }
    let bs_mb: f64 =
        allocation.v.iter().enumerate().filter(|(_, &v)| v).map(|(c, _)| problem.contents[c].size_mb).sum();
    if bs_mb > problem.bs_cache_capacity_mb + FEAS_TOL {
        flag("bs-cache-capacity", format!("{bs_mb} Mb > {}", problem.bs_cache_capacity_mb));
    }

    FeasibilityReport { ok: violations.is_empty(), violations }
}

/// Exact spectrum split for fixed assignments: every assigned link gets its
/// minimum fraction and the residual of each band goes to the assigned link
/// with the largest positive net gain (lowest link id on ties).
pub fn optimal_y_given_discrete(problem: &AllocationProblem, x: &[bool]) -> Result<Vec<f64>> {
    if x.len() != problem.links.len() {
        return Err(Error::ShapeMismatch(format!("expected {} assignments, got {}", problem.links.len(), x.len())));
    }
    let mut y = vec![0.0; x.len()];
    for band in [Band::Downlink, Band::Uplink] {
        let assigned: Vec<&CandidateLink> =
            problem.links.iter().filter(|l| x[l.link_id] && l.band() == band).collect();
        let used: f64 = assigned.iter().map(|l| l.y_min).sum();
        let budget = problem.band_budget(band);
        if used > budget + FEAS_TOL {
            return Err(Error::InfeasibleRate { band: band.name(), total: used });
        }
        for l in &assigned {
            y[l.link_id] = l.y_min;
        }
        let best = assigned
            .iter()
            .filter(|l| l.terms.r > 0.0)
            .fold(None::<&CandidateLink>, |best, l| match best {
                Some(b) if b.terms.r >= l.terms.r => Some(b),
                _ => Some(l),
            });
        if let Some(b) = best {
            let residual = (budget - used).max(0.0);
            y[b.link_id] = (b.y_min + residual).min(1.0);
        }
    }
    Ok(y)
}

/// Completes binary decisions with the exact spectrum split and evaluates them.
pub fn complete_allocation(problem: &AllocationProblem, x: Vec<bool>, z: Vec<bool>, v: Vec<bool>) -> Result<Solution> {
    let y = optimal_y_given_discrete(problem, &x)?;
    let allocation = Allocation { x, y, z, v };
    let objective = total_utility(problem, &allocation)?;
    Ok(Solution { allocation, objective })
}
