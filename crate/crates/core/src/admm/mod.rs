//! Distributed allocation by sharing-form ADMM. Each transmitter solves its
//! own relaxed subproblem; the hypervisor couples them through the
//! per-requester assignment rows and the shared uplink budget.

pub mod local;
pub mod repair;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::TxId;
use crate::error::{Error, Result};
use crate::problem::{AllocationProblem, Solution};

pub use local::{build_views, local_subproblem, BlockView, InnerSettings, LocalBlock};
pub use repair::{fill_unserved, round_and_repair, RelaxedAllocation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmConfig {
    pub rho: f64,
    pub max_iters: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub round_threshold: f64,
    /// Multiplies the utility inside the augmented objectives, so the penalty
    /// `rho` is measured against `utility_scale` times the utility.
    pub utility_scale: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 500.0,
            max_iters: 50,
            primal_tol: 1e-3,
            dual_tol: 1e-3,
            inner_iters: 200,
            inner_tol: 1e-6,
            round_threshold: 0.5,
            utility_scale: 15.0,
        }
    }
}

impl AdmmConfig {
    pub fn with_rho(rho: f64) -> Self {
        Self { rho, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("rho", self.rho)?;
        positive("primal_tol", self.primal_tol)?;
        positive("dual_tol", self.dual_tol)?;
        positive("inner_tol", self.inner_tol)?;
        positive("utility_scale", self.utility_scale)?;
        if self.max_iters == 0 || self.inner_iters == 0 {
            return Err(Error::InvalidArgument("iteration limits must be >= 1".into()));
        }
        if !(self.round_threshold > 0.0 && self.round_threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!("round_threshold must lie in (0, 1], got {}", self.round_threshold)));
        }
        Ok(())
    }

    fn inner(&self) -> InnerSettings {
        InnerSettings { max_iters: self.inner_iters, tol: self.inner_tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub relaxed_utility: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Objective of the allocation obtained by repairing this iterate.
    pub repaired_utility: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmmTrace {
    pub rows: Vec<TraceRow>,
}

impl AdmmTrace {
    /// First iteration whose primal residual is below `tol`.
    pub fn iterations_to_primal_tol(&self, tol: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.primal_residual < tol).map(|r| r.iteration)
    }

    /// First iteration after which every consecutive relative change of the
    /// relaxed utility stays below `rel_tol`.
    pub fn utility_stable_from(&self, rel_tol: f64) -> Option<usize> {
        self.stable_from(rel_tol, |r| r.relaxed_utility)
    }

    /// As [`Self::utility_stable_from`], for the repaired utility.
    pub fn repaired_stable_from(&self, rel_tol: f64) -> Option<usize> {
        self.stable_from(rel_tol, |r| r.repaired_utility)
    }

    fn stable_from(&self, rel_tol: f64, value: impl Fn(&TraceRow) -> f64) -> Option<usize> {
        let mut from = self.rows.first()?.iteration;
        for w in self.rows.windows(2) {
            let (prev, cur) = (value(&w[0]), value(&w[1]));
            if (cur - prev).abs() >= rel_tol * prev.abs().max(1e-12) {
                from = w[1].iteration;
            }
        }
        Some(from)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,relaxed_utility,primal_residual,dual_residual,repaired_utility\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e}",
                r.iteration, r.relaxed_utility, r.primal_residual, r.dual_residual, r.repaired_utility
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    /// At most one link per requester (node id).
    Requester(usize),
    /// Total D2D spectrum on the uplink band.
    Uplink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRow {
    pub kind: RowKind,
    pub bound: f64,
    /// `(block, entry)` pairs summed in this row.
    pub members: Vec<(usize, usize)>,
}

/// Hypervisor state: one target per block entry and one scaled dual per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingState {
    pub rows: Vec<CouplingRow>,
    /// Row of each block entry.
    pub entry_rows: Vec<Vec<usize>>,
    pub targets: Vec<Vec<f64>>,
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
}

impl CouplingState {
    pub fn new(problem: &AllocationProblem, views: &[BlockView]) -> Self {
        let mut rows: Vec<CouplingRow> = problem
            .requesters
            .iter()
            .map(|r| CouplingRow { kind: RowKind::Requester(r.node), bound: 1.0, members: Vec::new() })
            .collect();
        let uplink = rows.len();
        rows.push(CouplingRow { kind: RowKind::Uplink, bound: problem.band_budget_ul, members: Vec::new() });
        let mut entry_rows = Vec::with_capacity(views.len());
        for (j, view) in views.iter().enumerate() {
            let mut er = Vec::with_capacity(view.num_entries());
            for (e, &l) in view.links.iter().enumerate() {
                let q = problem.requester_index(problem.links[l].requester).expect("validated problem");
                rows[q].members.push((j, e));
                er.push(q);
            }
            if view.shares_band {
                rows[uplink].members.push((j, view.num_links()));
                er.push(uplink);
            }
            entry_rows.push(er);
        }
        let targets = views.iter().map(|v| vec![0.0; v.num_entries()]).collect();
        let duals = vec![0.0; rows.len()];
        Self { rows, entry_rows, targets, duals }
    }

    /// Duals seen by each entry of block `j`.
    pub fn block_duals(&self, j: usize) -> Vec<f64> {
        self.entry_rows[j].iter().map(|&r| self.duals[r]).collect()
    }

    /// Closed-form target update (projection of `a + u` onto each row's
    /// half-space), then scaled dual ascent. Rows are reduced in member order.
    pub fn global_update(&mut self, contributions: &[Vec<f64>], rho: f64) -> Result<Residuals> {
        if contributions.len() != self.targets.len()
            || contributions.iter().zip(&self.targets).any(|(c, t)| c.len() != t.len())
        {
            return Err(Error::ShapeMismatch(format!(
                "expected {} blocks with entry counts {:?}",
                self.targets.len(),
                self.targets.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        let (mut primal_sq, mut dual_sq) = (0.0, 0.0);
        for (r, row) in self.rows.iter().enumerate() {
            if row.members.is_empty() {
                continue;
            }
            let u = self.duals[r];
            let total: f64 = row.members.iter().map(|&(j, e)| contributions[j][e]).sum();
            let shifted: f64 = total + u * row.members.len() as f64;
            let shift = ((shifted - row.bound) / row.members.len() as f64).max(0.0);
            for &(j, e) in &row.members {
                let z = contributions[j][e] + u - shift;
                dual_sq += (z - self.targets[j][e]).powi(2);
                self.targets[j][e] = z;
            }
            self.duals[r] = shift;
            primal_sq += (total - row.bound).max(0.0).powi(2);
        }
        Ok(Residuals { primal: primal_sq.sqrt(), dual: rho * dual_sq.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmOutcome {
    pub solution: Solution,
    pub trace: AdmmTrace,
    pub converged: bool,
    pub iterations: usize,
    pub relaxed: RelaxedAllocation,
}

fn assemble(problem: &AllocationProblem, views: &[BlockView], blocks: &[LocalBlock]) -> RelaxedAllocation {
    let mut relaxed = RelaxedAllocation::zeros(problem);
    for (view, block) in views.iter().zip(blocks) {
        for (i, &l) in view.links.iter().enumerate() {
            relaxed.x[l] = block.x[i].clamp(0.0, 1.0);
            relaxed.y[l] = block.y[i].clamp(0.0, 1.0);
            if view.owner != TxId::Bs {
                relaxed.z[l] = block.c[i].clamp(0.0, 1.0);
            }
        }
        if view.owner == TxId::Bs {
            for (c, &v) in block.v.iter().enumerate() {
                relaxed.v[c] = v.clamp(0.0, 1.0);
            }
        }
    }
    relaxed
}

/// Runs sharing-form ADMM until both residuals fall below their tolerances
/// or `max_iters` is reached, then rounds and repairs the last iterate.
pub fn solve_admm(problem: &AllocationProblem, config: &AdmmConfig) -> Result<AdmmOutcome> {
    config.validate()?;
    let views = build_views(problem);
    let mut state = CouplingState::new(problem, &views);
    let mut blocks: Vec<LocalBlock> = views.iter().map(LocalBlock::zeros).collect();
    let mut trace = AdmmTrace::default();
    let mut converged = views.is_empty();
    let mut iterations = 0;
    let inner = config.inner();
    let rho = config.rho / config.utility_scale;

    if !views.is_empty() {
        for k in 1..=config.max_iters {
            blocks = views
                .par_iter()
                .zip(blocks.par_iter())
                .enumerate()
                .map(|(j, (view, warm))| {
                    local_subproblem(view, &state.block_duals(j), &state.targets[j], rho, inner, Some(warm))
                })
                .collect();
            let contributions: Vec<Vec<f64>> = views.iter().zip(&blocks).map(|(v, b)| b.contributions(v)).collect();
            let res = state.global_update(&contributions, rho)?;
            let relaxed_utility: f64 = views.iter().zip(&blocks).map(|(v, b)| b.utility(v)).sum();
            let repaired = fill_unserved(problem, round_and_repair(&assemble(problem, &views, &blocks), problem, config.round_threshold)?)?;
            trace.rows.push(TraceRow {
                iteration: k,
                relaxed_utility,
                primal_residual: res.primal,
                dual_residual: res.dual,
                repaired_utility: repaired.objective,
            });
            iterations = k;
            if res.primal < config.primal_tol && res.dual < config.dual_tol {
                converged = true;
                break;
            }
        }
    }

    let relaxed = assemble(problem, &views, &blocks);
    let solution = fill_unserved(problem, round_and_repair(&relaxed, problem, config.round_threshold)?)?;
    Ok(AdmmOutcome { solution, trace, converged, iterations, relaxed })
}
