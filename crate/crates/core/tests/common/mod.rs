//! Seeded instance generators shared by the integration tests.
#![allow(dead_code)]

use icnd2d::report::{build_instance, Instance};
use icnd2d::scenario::Config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(tag: u64, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed)
}

/// At most 3 requesters, at most 2 D2D transmitters and 2 contents, in a
/// small cell so D2D candidates are common. Prices are randomized so both
/// signs of the caching gains occur.
pub fn tiny_config(seed: u64) -> Config {
    let mut r = rng(1, seed);
    let mut cfg = Config {
        cell_radius_m: r.gen_range(60.0..200.0),
        num_transmitters: r.gen_range(1..=2),
        num_requesters: r.gen_range(1..=3),
        num_contents: 2,
        bs_cache_capacity: r.gen_range(1..=2),
        dev_cache_init_prob: 0.6,
        rate_req_mbps: r.gen_range(0.5..20.0),
        seed,
        ..Config::default()
    };
    cfg.prices.phi_per_mb = r.gen_range(0.0..1.0);
    cfg.prices.psi_dev_per_mb = r.gen_range(0.0..0.5);
    cfg.prices.psi_bs_per_mb = r.gen_range(0.0..0.5);
    cfg
}

pub fn tiny_instance(seed: u64) -> Instance {
    build_instance(&tiny_config(seed), seed).expect("valid tiny config")
}

/// At most 8 requesters and 4 transmitters with the default prices.
pub fn small_instance(seed: u64) -> Instance {
    let mut r = rng(2, seed);
    let cfg = Config {
        cell_radius_m: r.gen_range(150.0..500.0),
        num_transmitters: r.gen_range(1..=4),
        num_requesters: r.gen_range(1..=8),
        seed,
        ..Config::default()
    };
    build_instance(&cfg, seed).expect("valid small config")
}

/// Broad random configurations for feasibility sweeps, including tight rate
/// requirements that saturate the bands and tight cache capacities.
pub fn random_config(seed: u64) -> Config {
    let mut r = rng(3, seed);
    let num_contents = r.gen_range(1..=6);
    let mut cfg = Config {
        cell_radius_m: r.gen_range(50.0..600.0),
        num_transmitters: r.gen_range(1..=12),
        num_requesters: r.gen_range(1..=16),
        num_contents,
        zipf_epsilon: r.gen_range(0.2..2.5),
        content_size_mb: r.gen_range(0.5..5.0),
        bs_cache_capacity: r.gen_range(1..=num_contents),
        device_cache_capacity: r.gen_range(1..=num_contents),
        rate_req_mbps: r.gen_range(0.5..30.0),
        bs_cache_init_prob: r.gen_range(0.0..1.0),
        dev_cache_init_prob: r.gen_range(0.0..1.0),
        seed,
        ..Config::default()
    };
    cfg.prices.phi_per_mb = r.gen_range(0.0..1.0);
    cfg.prices.psi_dev_per_mb = r.gen_range(0.0..0.5);
    cfg.prices.psi_bs_per_mb = r.gen_range(0.0..0.5);
    cfg
}

pub fn random_instance(seed: u64) -> Instance {
    build_instance(&random_config(seed), seed).expect("valid random config")
}
