//! Economic coefficients of the per-link utility: net gain of the spectrum
//! share, estimated backhaul saving and storage costs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Content, DemandSet, PopularityProfile, PriceTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LinkKind {
    Cellular,
    D2D,
}

/// Coefficients of one candidate link's utility
/// `y*r + z*(phi_e - psi_dev_s)` (D2D) or `y*r + v*(phi_e - psi_bs_s)` (cellular).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkTerms {
    /// Net gain when the link owns the whole band.
    pub r: f64,
    pub phi_e: f64,
    pub psi_dev_s: f64,
    pub psi_bs_s: f64,
    pub link_kind: LinkKind,
}

impl LinkTerms {
    /// Net value of the caching decision this link can carry: requester-side
    /// caching for D2D links, BS caching for cellular links.
    pub fn cache_gain(&self) -> f64 {
        match self.link_kind {
            LinkKind::D2D => self.phi_e - self.psi_dev_s,
            LinkKind::Cellular => self.phi_e - self.psi_bs_s,
        }
    }

    /// Same link with every caching coefficient zeroed.
    pub fn without_caching(&self) -> Self {
        Self { phi_e: 0.0, psi_dev_s: 0.0, psi_bs_s: 0.0, ..*self }
    }
}

/// Exponentially smoothed popularity estimate built from observed demands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityEstimate {
    pub q_hat: Vec<f64>,
    pub ema_gamma: f64,
}

impl PopularityEstimate {
    pub fn new(q_hat: Vec<f64>, ema_gamma: f64) -> Result<Self> {
        if !(ema_gamma > 0.0 && ema_gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("ema_gamma must lie in (0, 1], got {ema_gamma}")));
        }
        let sum: f64 = q_hat.iter().sum();
        if q_hat.is_empty() || q_hat.iter().any(|q| !(*q >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("q_hat must be a probability vector".into()));
        }
        Ok(Self { q_hat, ema_gamma })
    }

    pub fn from_profile(profile: &PopularityProfile, ema_gamma: f64) -> Result<Self> {
        Self::new(profile.probs.clone(), ema_gamma)
    }
}

/// Expected Mb of duplicate downloads avoided next interval by caching `content`.
pub fn estimate_backhaul_saving(content: &Content, estimate: &PopularityEstimate, num_requesters: usize) -> f64 {
    estimate.q_hat.get(content.id).copied().unwrap_or(0.0) * num_requesters as f64 * content.size_mb
}

/// Blends the empirical demand frequencies into the estimate with weight `ema_gamma`.
pub fn update_popularity_estimate(estimate: &PopularityEstimate, observed: &DemandSet) -> Result<PopularityEstimate> {
    if observed.is_empty() {
        return Err(Error::EmptyDemand);
    }
    let n = estimate.q_hat.len();
    let mut freq = vec![0.0; n];
    for &c in observed.demands.values() {
        if c >= n {
            return Err(Error::InconsistentInput(format!("demand for unknown content {c}")));
        }
        freq[c] += 1.0;
    }
    let total = observed.len() as f64;
    let g = estimate.ema_gamma;
    let mut q: Vec<f64> = estimate.q_hat.iter().zip(&freq).map(|(q, f)| (1.0 - g) * q + g * f / total).collect();
    let sum: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= sum);
    Ok(PopularityEstimate { q_hat: q, ema_gamma: g })
}

/// Revenue minus leasing cost (cellular) or owner incentive (D2D) at full band.
pub fn net_link_gain(kind: LinkKind, full_band_rate_bps: f64, prices: &PriceTable) -> f64 {
    let beta = match kind {
        LinkKind::Cellular => prices.beta_cellular_per_mbps,
        LinkKind::D2D => prices.beta_d2d_per_mbps,
    };
    (prices.alpha_per_mbps - beta) * full_band_rate_bps / 1.0e6
}

/// Fills the utility coefficients of a link delivering `content`.
pub fn link_terms(
    kind: LinkKind,
    full_band_rate_bps: f64,
    content: &Content,
    estimate: &PopularityEstimate,
    num_requesters: usize,
    prices: &PriceTable,
) -> LinkTerms {
    let e = estimate_backhaul_saving(content, estimate, num_requesters);
    LinkTerms {
        r: net_link_gain(kind, full_band_rate_bps, prices),
        phi_e: prices.phi_per_mb * e,
        psi_dev_s: prices.psi_dev_per_mb * content.size_mb,
        psi_bs_s: prices.psi_bs_per_mb * content.size_mb,
        link_kind: kind,
    }
}

/// Utility of one link for spectrum share `y`, requester caching `z` and BS caching `v`.
pub fn link_utility(y: f64, z: bool, v: bool, terms: &LinkTerms) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::Domain(format!("spectrum fraction {y} outside [0, 1]")));
    }
    match terms.link_kind {
        LinkKind::D2D if v => Err(Error::Domain("BS caching term on a D2D link".into())),
        LinkKind::Cellular if z => Err(Error::Domain("requester caching on a cellular link".into())),
        _ => {
            let cached = z || v;
            Ok(y * terms.r + if cached { terms.cache_gain() } else { 0.0 })
        }
    }
}
