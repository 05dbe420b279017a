//! Reproducible network scenarios: topology, roles, MVNO membership, content
//! catalog, popularity, initial cache placement and per-interval demands.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Per-unit prices entering the link utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriceTable {
    /// Access revenue per Mbps of delivered rate.
    pub alpha_per_mbps: f64,
    /// Leasing cost per Mbps paid to the infrastructure provider on cellular links.
    pub beta_cellular_per_mbps: f64,
    /// Incentive per Mbps paid to the owner of a D2D transmitter.
    pub beta_d2d_per_mbps: f64,
    /// Value per Mb of saved backhaul.
    pub phi_per_mb: f64,
    /// Device storage price per Mb per interval.
    pub psi_dev_per_mb: f64,
    /// BS storage price per Mb per interval.
    pub psi_bs_per_mb: f64,
}

impl Default for PriceTable {
    fn default() -> Self {
        Self {
            alpha_per_mbps: 1.0,
            beta_cellular_per_mbps: 0.4,
            beta_d2d_per_mbps: 0.2,
            phi_per_mb: 0.5,
            psi_dev_per_mb: 0.1,
            psi_bs_per_mb: 0.05,
        }
    }
}

impl PriceTable {
    pub fn validate(&self) -> Result<()> {
        let entries: [(&'static str, f64); 6] = [
            ("prices.alpha_per_mbps", self.alpha_per_mbps),
            ("prices.beta_cellular_per_mbps", self.beta_cellular_per_mbps),
            ("prices.beta_d2d_per_mbps", self.beta_d2d_per_mbps),
            ("prices.phi_per_mb", self.phi_per_mb),
            ("prices.psi_dev_per_mb", self.psi_dev_per_mb),
            ("prices.psi_bs_per_mb", self.psi_bs_per_mb),
        ];
        for (key, v) in entries {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig { key, reason: format!("must be a finite value >= 0, got {v}") });
            }
        }
        if self.alpha_per_mbps <= self.beta_cellular_per_mbps {
            return Err(Error::InvalidConfig {
                key: "prices.alpha_per_mbps",
                reason: "must exceed beta_cellular_per_mbps".into(),
            });
        }
        if self.alpha_per_mbps <= self.beta_d2d_per_mbps {
            return Err(Error::InvalidConfig {
                key: "prices.alpha_per_mbps",
                reason: "must exceed beta_d2d_per_mbps".into(),
            });
        }
        Ok(())
    }
}

/// Simulation configuration. JSON keys are exactly the field names; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub cell_radius_m: f64,
    pub num_transmitters: usize,
    pub num_requesters: usize,
    pub num_mvnos: usize,
    pub num_contents: usize,
    pub zipf_epsilon: f64,
    pub content_size_mb: f64,
    pub bs_cache_capacity: usize,
    pub device_cache_capacity: usize,
    pub bw_dl_hz: f64,
    pub bw_ul_hz: f64,
    pub tx_power_bs_dbm: f64,
    pub tx_power_d2d_dbm: f64,
    pub shadowing_std_db: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub rate_req_mbps: f64,
    pub d2d_max_distance_m: f64,
    pub bs_cache_init_prob: f64,
    pub dev_cache_init_prob: f64,
    /// Per-interval probability that a caching requester turns transmitter
    /// (and that an empty transmitter turns requester).
    pub role_flip_prob: f64,
    /// Smoothing weight of the popularity estimate.
    pub ema_gamma: f64,
    pub prices: PriceTable,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            cell_radius_m: 500.0,
            num_transmitters: 30,
            num_requesters: 35,
            num_mvnos: 4,
            num_contents: 5,
            zipf_epsilon: 1.5,
            content_size_mb: 2.0,
            bs_cache_capacity: 5,
            device_cache_capacity: 1,
            bw_dl_hz: 1.0e7,
            bw_ul_hz: 5.0e6,
            tx_power_bs_dbm: 46.0,
            tx_power_d2d_dbm: 24.0,
            shadowing_std_db: 8.0,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 9.0,
            rate_req_mbps: 2.0,
            d2d_max_distance_m: 100.0,
            bs_cache_init_prob: 0.5,
            dev_cache_init_prob: 0.2,
            role_flip_prob: 0.1,
            ema_gamma: 0.3,
            prices: PriceTable::default(),
            seed: 0,
        }
    }
}

fn positive(key: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig { key, reason: format!("must be > 0, got {v}") })
    }
}

fn probability(key: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidConfig { key, reason: format!("must lie in [0, 1], got {v}") })
    }
}

fn at_least_one(key: &'static str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidConfig { key, reason: "must be >= 1".into() })
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        at_least_one("num_transmitters", self.num_transmitters)?;
        at_least_one("num_requesters", self.num_requesters)?;
        at_least_one("num_mvnos", self.num_mvnos)?;
        at_least_one("num_contents", self.num_contents)?;
        at_least_one("bs_cache_capacity", self.bs_cache_capacity)?;
        at_least_one("device_cache_capacity", self.device_cache_capacity)?;
        positive("cell_radius_m", self.cell_radius_m)?;
        positive("zipf_epsilon", self.zipf_epsilon)?;
        positive("content_size_mb", self.content_size_mb)?;
        positive("bw_dl_hz", self.bw_dl_hz)?;
        positive("bw_ul_hz", self.bw_ul_hz)?;
        positive("rate_req_mbps", self.rate_req_mbps)?;
        for (key, v) in [
            ("tx_power_bs_dbm", self.tx_power_bs_dbm),
            ("tx_power_d2d_dbm", self.tx_power_d2d_dbm),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("noise_figure_db", self.noise_figure_db),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig { key, reason: "must be finite".into() });
            }
        }
        if !(self.shadowing_std_db.is_finite() && self.shadowing_std_db >= 0.0) {
            return Err(Error::InvalidConfig { key: "shadowing_std_db", reason: "must be >= 0".into() });
        }
        if !(self.d2d_max_distance_m.is_finite() && self.d2d_max_distance_m >= 0.0) {
            return Err(Error::InvalidConfig { key: "d2d_max_distance_m", reason: "must be >= 0".into() });
        }
        probability("bs_cache_init_prob", self.bs_cache_init_prob)?;
        probability("dev_cache_init_prob", self.dev_cache_init_prob)?;
        probability("role_flip_prob", self.role_flip_prob)?;
        if !(self.ema_gamma > 0.0 && self.ema_gamma <= 1.0) {
            return Err(Error::InvalidConfig { key: "ema_gamma", reason: "must lie in (0, 1]".into() });
        }
        if self.device_cache_capacity > self.num_contents {
            return Err(Error::InvalidConfig {
                key: "device_cache_capacity",
                reason: "must not exceed num_contents".into(),
            });
        }
        if self.bs_cache_capacity > self.num_contents {
            return Err(Error::InvalidConfig { key: "bs_cache_capacity", reason: "must not exceed num_contents".into() });
        }
        self.prices.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bs_cache_capacity_mb(&self) -> f64 {
        self.bs_cache_capacity as f64 * self.content_size_mb
    }

    pub fn device_cache_capacity_mb(&self) -> f64 {
        self.device_cache_capacity as f64 * self.content_size_mb
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Transmitter,
    Requester,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub role: Role,
    pub mvno: usize,
    /// Meters, BS at the origin.
    pub position: [f64; 2],
}

impl Node {
    pub fn distance_to_origin(&self) -> f64 {
        self.position[0].hypot(self.position[1])
    }

    pub fn distance_to(&self, other: &Node) -> f64 {
        (self.position[0] - other.position[0]).hypot(self.position[1] - other.position[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Content {
    pub id: usize,
    pub size_mb: f64,
}

/// Request probabilities indexed by popularity rank (content 0 is the most popular).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PopularityProfile {
    pub probs: Vec<f64>,
}

impl PopularityProfile {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Inverse-CDF draw from a uniform sample in [0, 1).
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (c, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return c;
            }
        }
        self.probs.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub nodes: Vec<Node>,
    pub contents: Vec<Content>,
    pub popularity: PopularityProfile,
    pub config: Config,
}

impl Scenario {
    pub fn requesters(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.role == Role::Requester)
    }

    pub fn transmitters(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.role == Role::Transmitter)
    }

    pub fn num_requesters(&self) -> usize {
        self.requesters().count()
    }

    pub fn num_transmitters(&self) -> usize {
        self.transmitters().count()
    }

    /// Checks the structural invariants of a (possibly deserialized) scenario.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let cfg = &self.config;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::InconsistentInput(format!("node at index {i} has id {}", n.id)));
            }
            if n.mvno >= cfg.num_mvnos {
                return Err(Error::InconsistentInput(format!("node {i} has mvno {} >= {}", n.mvno, cfg.num_mvnos)));
            }
            if n.distance_to_origin() > cfg.cell_radius_m * (1.0 + 1e-12) {
                return Err(Error::InconsistentInput(format!("node {i} lies outside the cell")));
            }
        }
        for (i, c) in self.contents.iter().enumerate() {
            if c.id != i || !(c.size_mb > 0.0) {
                return Err(Error::InconsistentInput(format!("content {i} is malformed")));
            }
        }
        if self.popularity.len() != self.contents.len() {
            return Err(Error::InconsistentInput("popularity length differs from catalog size".into()));
        }
        Ok(())
    }
}

/// Which contents the BS and each device hold.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CacheState {
    pub bs_cache: BTreeSet<usize>,
    pub device_caches: BTreeMap<usize, BTreeSet<usize>>,
}

impl CacheState {
    pub fn device(&self, node: usize) -> Option<&BTreeSet<usize>> {
        self.device_caches.get(&node)
    }

    pub fn device_holds(&self, node: usize, content: usize) -> bool {
        self.device_caches.get(&node).is_some_and(|s| s.contains(&content))
    }

    /// Capacity violations as human-readable strings; empty when valid.
    pub fn capacity_violations(&self, cfg: &Config) -> Vec<String> {
        let mut out = Vec::new();
        if self.bs_cache.len() > cfg.bs_cache_capacity {
            out.push(format!("bs cache holds {} > {}", self.bs_cache.len(), cfg.bs_cache_capacity));
        }
        for (node, set) in &self.device_caches {
            if set.len() > cfg.device_cache_capacity {
                out.push(format!("device {node} holds {} > {}", set.len(), cfg.device_cache_capacity));
            }
        }
        out
    }
}

/// Content demanded by each requester in one interval.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DemandSet {
    pub demands: BTreeMap<usize, usize>,
}

impl DemandSet {
    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }
}

/// Zipf popularity over `num_contents` ranked contents: `q_c = C / c^epsilon`
/// with 1-based rank `c` and `C` normalizing the sum to one.
pub fn zipf_popularity(num_contents: usize, epsilon: f64) -> Result<PopularityProfile> {
    if num_contents == 0 {
        return Err(Error::InvalidArgument("num_contents must be >= 1".into()));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("zipf exponent must be > 0, got {epsilon}")));
    }
    let weights: Vec<f64> = (1..=num_contents).map(|c| (c as f64).powf(-epsilon)).collect();
    let norm: f64 = weights.iter().sum();
    Ok(PopularityProfile { probs: weights.into_iter().map(|w| w / norm).collect() })
}

/// Places nodes uniformly over the cell disk, assigns the first
/// `num_transmitters` draws the transmitter role and draws MVNO membership
/// uniformly.
pub fn generate_topology(config: &Config, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = rng::stream(seed, rng::TOPOLOGY, &[]);
    let total = config.num_transmitters + config.num_requesters;
    let mut nodes = Vec::with_capacity(total);
    for id in 0..total {
        let radius = config.cell_radius_m * rng.gen::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.gen::<f64>();
        let mvno = rng.gen_range(0..config.num_mvnos);
        let role = if id < config.num_transmitters { Role::Transmitter } else { Role::Requester };
        nodes.push(Node { id, role, mvno, position: [radius * theta.cos(), radius * theta.sin()] });
    }
    let contents = (0..config.num_contents).map(|id| Content { id, size_mb: config.content_size_mb }).collect();
    let popularity = zipf_popularity(config.num_contents, config.zipf_epsilon)?;
    Ok(Scenario { nodes, contents, popularity, config: config.clone() })
}

/// Initial placement: each content lands in the BS with probability
/// `bs_cache_init_prob` (excess beyond capacity dropped from the least
/// popular end); each transmitter scans contents in popularity order with
/// per-content probability `dev_cache_init_prob` and stops once full.
pub fn initial_cache_placement(scenario: &Scenario, seed: u64) -> CacheState {
    let cfg = &scenario.config;
    let n_contents = scenario.contents.len();
    let mut bs_rng = rng::stream(seed, rng::PLACEMENT, &[u64::MAX]);
    let mut bs_cache: BTreeSet<usize> =
        (0..n_contents).filter(|_| bs_rng.gen::<f64>() < cfg.bs_cache_init_prob).collect();
    while bs_cache.len() > cfg.bs_cache_capacity {
        let last = *bs_cache.iter().next_back().expect("nonempty");
        bs_cache.remove(&last);
    }

    let mut device_caches = BTreeMap::new();
    for node in &scenario.nodes {
        let mut held = BTreeSet::new();
        if node.role == Role::Transmitter {
            let mut dev_rng = rng::stream(seed, rng::PLACEMENT, &[node.id as u64]);
            for c in 0..n_contents {
                if held.len() >= cfg.device_cache_capacity {
                    break;
                }
                if dev_rng.gen::<f64>() < cfg.dev_cache_init_prob {
                    held.insert(c);
                }
            }
        }
        device_caches.insert(node.id, held);
    }
    CacheState { bs_cache, device_caches }
}

/// Each requester independently draws one content from `popularity`.
pub fn draw_demands(scenario: &Scenario, popularity: &PopularityProfile, seed: u64) -> DemandSet {
    let mut rng = rng::stream(seed, rng::DEMANDS, &[]);
    let demands = scenario.requesters().map(|n| (n.id, popularity.sample_with(rng.gen::<f64>()))).collect();
    DemandSet { demands }
}
