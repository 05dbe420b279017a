//! Single-cell simulator and resource-allocation solvers for information-centric
//! virtualized cellular networks with device-to-device (D2D) delivery and
//! in-device caching.
//!
//! The pipeline is: [`scenario`] generates topology, catalog and caches;
//! [`channel`] samples link gains and full-band rates; [`economy`] turns them
//! into per-link utility coefficients; [`problem`] assembles the allocation
//! problem; and the solvers ([`solver_exact`], [`admm`], [`baselines`]) return
//! feasible allocations. [`simloop`] runs multiple refresh intervals and
//! [`report`] drives the experiment sweeps behind the CLI.

pub mod admm;
pub mod baselines;
pub mod channel;
pub mod cli;
pub mod economy;
pub mod error;
pub mod problem;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod simloop;
pub mod solver_exact;

pub use error::{Error, Result};
