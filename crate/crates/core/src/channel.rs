//! Link gains and full-band Shannon rates for cellular (BS to requester) and
//! D2D (transmitter to requester) links.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scenario::Scenario;

/// Sending end of a candidate link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TxId {
    Bs,
    Device(usize),
}

impl TxId {
    fn stream_word(self) -> u64 {
        match self {
            TxId::Bs => u64::MAX,
            TxId::Device(n) => n as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGain {
    pub path_loss_db: f64,
    pub shadowing_db: f64,
    pub fading_linear: f64,
    pub gain_linear: f64,
}

impl LinkGain {
    /// Builds a gain from its components, keeping `gain_linear` consistent.
    pub fn new(path_loss_db: f64, shadowing_db: f64, fading_linear: f64) -> Self {
        let gain_linear = 10f64.powf(-(path_loss_db + shadowing_db) / 10.0) * fading_linear;
        Self { path_loss_db, shadowing_db, fading_linear, gain_linear }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub psd_dbm_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { psd_dbm_hz: -174.0, noise_figure_db: 9.0 }
    }
}

impl NoiseModel {
    pub fn power_dbm(&self, bandwidth_hz: f64) -> f64 {
        self.psd_dbm_hz + self.noise_figure_db + 10.0 * bandwidth_hz.log10()
    }
}

/// `35.3 + 37.6 log10(d)`, with `d` clamped to at least one meter.
pub fn path_loss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::InvalidArgument(format!("distance must be > 0, got {distance_m}")));
    }
    Ok(35.3 + 37.6 * distance_m.max(1.0).log10())
}

/// Log-normal shadowing (`shadow_std_db` in dB) and unit-mean exponential
/// fading on top of the distance path loss.
pub fn sample_link_gain<R: Rng + ?Sized>(distance_m: f64, shadow_std_db: f64, rng: &mut R) -> Result<LinkGain> {
    let pl = path_loss_db(distance_m)?;
    if !(shadow_std_db.is_finite() && shadow_std_db >= 0.0) {
        return Err(Error::InvalidArgument(format!("shadowing std must be >= 0, got {shadow_std_db}")));
    }
    let shadow = Normal::new(0.0, shadow_std_db).expect("finite std").sample(rng);
    let fading: f64 = Exp1.sample(rng);
    // Exp1 can return exactly zero only with negligible probability; keep gains positive.
    Ok(LinkGain::new(pl, shadow, fading.max(f64::MIN_POSITIVE)))
}

/// Shannon rate in bps when the link owns the whole band; no co-channel interference.
pub fn full_band_rate(tx_power_dbm: f64, gain: &LinkGain, bandwidth_hz: f64, noise: &NoiseModel) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be > 0, got {bandwidth_hz}")));
    }
    let noise_mw = 10f64.powf(noise.power_dbm(bandwidth_hz) / 10.0);
    let rx_mw = 10f64.powf(tx_power_dbm / 10.0) * gain.gain_linear;
    let snr = rx_mw / noise_mw;
    Ok(bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2)
}

/// Gains of every link the problem builder may consider in one interval:
/// the BS to each requester and each transmitter to each requester within
/// D2D range. Each link draws from its own sub-stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelSamples {
    pub gains: BTreeMap<(TxId, usize), LinkGain>,
}

impl ChannelSamples {
    pub fn get(&self, tx: TxId, rx: usize) -> Option<&LinkGain> {
        self.gains.get(&(tx, rx))
    }
}

pub fn sample_channels(scenario: &Scenario, seed: u64) -> Result<ChannelSamples> {
    let cfg = &scenario.config;
    let mut gains = BTreeMap::new();
    let mut draw = |tx: TxId, rx: usize, distance: f64| -> Result<()> {
        let mut stream = rng::stream(seed, rng::CHANNEL, &[tx.stream_word(), rx as u64]);
        // Co-located nodes are clamped to the 1 m reference distance.
        let gain = sample_link_gain(distance.max(1e-9), cfg.shadowing_std_db, &mut stream)?;
        gains.insert((tx, rx), gain);
        Ok(())
    };
    for req in scenario.requesters() {
        draw(TxId::Bs, req.id, req.distance_to_origin())?;
        for tx in scenario.transmitters() {
            let d = tx.distance_to(req);
            if d <= cfg.d2d_max_distance_m {
                draw(TxId::Device(tx.id), req.id, d)?;
            }
        }
    }
    Ok(ChannelSamples { gains })
}
