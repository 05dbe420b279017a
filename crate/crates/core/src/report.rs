//! Experiment drivers behind the CLI: seeded instances, parameter sweeps,
//! convergence studies and their CSV / plot-data output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{solve_admm, AdmmConfig, AdmmOutcome};
use crate::channel::sample_channels;
use crate::economy::PopularityEstimate;
use crate::error::{Error, Result};
use crate::problem::{build_problem, AllocationProblem};
use crate::scenario::{draw_demands, generate_topology, initial_cache_placement, CacheState, Config, DemandSet, Scenario};
use crate::simloop::SolverChoice;

/// Formats a number with 6 significant digits in C `%g` style.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep_param_value: f64,
    pub solver: String,
    pub mean_utility: f64,
    pub stderr: f64,
    pub seeds: usize,
}

pub const RESULTS_HEADER: &str = "sweep_param_value,solver,mean_utility,stderr,seeds";

pub fn results_csv(records: &[SweepRecord]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_sig(r.sweep_param_value),
            r.solver,
            format_sig(r.mean_utility),
            format_sig(r.stderr),
            r.seeds
        );
    }
    out
}

pub fn write_results_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    std::fs::write(path, results_csv(records))?;
    Ok(())
}

pub fn parse_results_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(RESULTS_HEADER) {
        return Err(Error::InvalidArgument("missing results header".into()));
    }
    let bad = |line: &str| Error::InvalidArgument(format!("malformed results row `{line}`"));
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            Ok(SweepRecord {
                sweep_param_value: num(f[0])?,
                solver: f[1].to_string(),
                mean_utility: num(f[2])?,
                stderr: num(f[3])?,
                seeds: f[4].parse().map_err(|_| bad(line))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    Requesters,
    ContentSizeMb,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "requesters" => Ok(SweepParam::Requesters),
            "content-size-mb" => Ok(SweepParam::ContentSizeMb),
            other => Err(Error::InvalidArgument(format!("unknown sweep parameter `{other}`"))),
        }
    }

    pub fn apply(self, config: &Config, value: f64) -> Result<Config> {
        let mut cfg = config.clone();
        match self {
            SweepParam::Requesters => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::InvalidArgument(format!("requester count must be a positive integer, got {value}")));
                }
                cfg.num_requesters = value as usize;
            }
            SweepParam::ContentSizeMb => cfg.content_size_mb = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Expands `start:stop:step` (inclusive of `stop`) or a single number.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("expected start:stop:step, got `{spec}`"));
    let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    match parts[..] {
        [v] => Ok(vec![v]),
        [start, stop, step] if step > 0.0 && stop >= start => {
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| start + k as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}

/// One interval's allocation problem together with the state it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub seed: u64,
    pub scenario: Scenario,
    pub cache_state: CacheState,
    pub demands: DemandSet,
    pub problem: AllocationProblem,
}

/// Topology, initial caches, demands from the true profile and channels, all
/// derived from `seed`.
pub fn build_instance(config: &Config, seed: u64) -> Result<Instance> {
    let scenario = generate_topology(config, seed)?;
    let cache_state = initial_cache_placement(&scenario, seed);
    let demands = draw_demands(&scenario, &scenario.popularity, seed);
    let channels = sample_channels(&scenario, seed)?;
    let estimate = PopularityEstimate::from_profile(&scenario.popularity, config.ema_gamma)?;
    let problem = build_problem(&scenario, &cache_state, &demands, &channels, &estimate)?;
    Ok(Instance { seed, scenario, cache_state, demands, problem })
}

/// Seed of the `k`-th replicate; replicates are shared across sweep points.
pub fn replicate_seed(base: u64, k: usize) -> u64 {
    base.wrapping_add(k as u64)
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Solves every `(value, seed)` instance with every solver. Instances run in
/// parallel; records come back ordered by value, then solver.
pub fn run_sweep(
    config: &Config,
    param: SweepParam,
    values: &[f64],
    solvers: &[SolverChoice],
    seeds: usize,
) -> Result<Vec<SweepRecord>> {
    if seeds == 0 {
        return Err(Error::InvalidArgument("seeds must be >= 1".into()));
    }
    let configs: Vec<Config> = values.iter().map(|&v| param.apply(config, v)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..values.len()).flat_map(|i| (0..seeds).map(move |k| (i, k))).collect();
    let objectives: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let inst = build_instance(&configs[i], replicate_seed(config.seed, k))?;
            solvers.iter().map(|s| s.solve(&inst.problem).map(|sol| sol.objective)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(values.len() * solvers.len());
    for (i, &value) in values.iter().enumerate() {
        for (s, solver) in solvers.iter().enumerate() {
            let samples: Vec<f64> = (0..seeds).map(|k| objectives[i * seeds + k][s]).collect();
            let (mean_utility, stderr) = mean_stderr(&samples);
            records.push(SweepRecord {
                sweep_param_value: value,
                solver: solver.name().to_string(),
                mean_utility,
                stderr,
                seeds,
            });
        }
    }
    Ok(records)
}

/// ADMM traces of one instance for each penalty parameter.
pub fn run_convergence(config: &Config, rhos: &[f64], seed: u64, admm: &AdmmConfig) -> Result<Vec<(f64, AdmmOutcome)>> {
    let inst = build_instance(config, seed)?;
    rhos.par_iter()
        .map(|&rho| Ok((rho, solve_admm(&inst.problem, &AdmmConfig { rho, ..*admm })?)))
        .collect()
}

/// `{out}_rho{rho}.csv` next to `out`.
pub fn convergence_path(out: &Path, rho: f64) -> PathBuf {
    let stem = out.with_extension("");
    PathBuf::from(format!("{}_rho{}.csv", stem.display(), format_sig(rho)))
}

/// Plain whitespace-separated two-column data.
pub fn write_plot_data(points: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (x, y) in points {
        let _ = writeln!(out, "{} {}", format_sig(*x), format_sig(*y));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Runs `f` on a pool capped by `ICND2D_THREADS` when set, else on the global pool.
pub fn with_thread_limit<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var("ICND2D_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::InvalidArgument(format!("ICND2D_THREADS must be a positive integer, got `{v}`")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}
