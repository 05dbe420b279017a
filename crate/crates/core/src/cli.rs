//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::admm::AdmmConfig;
use crate::error::{Error, Result};
use crate::problem::{check_feasible, Allocation};
use crate::report::{
    build_instance, convergence_path, parse_values, run_convergence, run_sweep, with_thread_limit, write_plot_data,
    write_results_csv, Instance, SweepParam,
};
use crate::scenario::{generate_topology, Config};
use crate::simloop::{run_interval, update_roles, IntervalResult, SimState, SolverChoice};
use crate::solver_exact::ExactLimits;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_BAD_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "icnd2d", version, about = "Virtualized cellular network with D2D caching: instances, solvers and experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one seeded instance and write it as JSON.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance written by `gen`.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "admm")]
        solver: String,
        #[arg(long, default_value_t = 500.0)]
        rho: f64,
        #[arg(long)]
        max_nodes: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean utility per solver over seeds for each value of one parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        param: String,
        /// `start:stop:step`, inclusive.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "exact,admm,no-caching,no-d2d")]
        solvers: String,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long, default_value_t = 500.0)]
        rho: f64,
        #[arg(long)]
        max_nodes: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write `{prefix}_{solver}.dat` two-column files.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// ADMM traces of one instance for several penalty parameters.
    Convergence {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "500,550,600")]
        rho: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write `{prefix}_rho{rho}.dat` two-column files.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Multi-interval simulation with cache refresh and role transitions.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        intervals: u64,
        #[arg(long, default_value = "admm")]
        solver: String,
        #[arg(long, default_value_t = 500.0)]
        rho: f64,
        #[arg(long)]
        max_nodes: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Maps an error to its process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::InfeasibleRate { .. } | Error::Infeasible(_) => EXIT_INFEASIBLE,
        _ => EXIT_BAD_INPUT,
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::from_json(&std::fs::read_to_string(p)?),
        None => Ok(Config::default()),
    }
}

fn exact_limits(max_nodes: Option<u64>) -> ExactLimits {
    ExactLimits { max_nodes: max_nodes.or(ExactLimits::default().max_nodes), time_budget_s: None }
}

fn admm_config(rho: f64) -> Result<AdmmConfig> {
    let cfg = AdmmConfig::with_rho(rho);
    cfg.validate()?;
    Ok(cfg)
}

fn parse_rhos(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|r| *r > 0.0 && r.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("invalid rho `{s}`")))
        })
        .collect()
}

#[derive(Serialize)]
struct SolveReport<'a> {
    solver: &'a str,
    objective: f64,
    feasible: bool,
    allocation: &'a Allocation,
}

/// Runs one parsed command; the returned error decides the exit code.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { config, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let inst = build_instance(&cfg, seed)?;
            std::fs::write(out, serde_json::to_string_pretty(&inst)?)?;
        }
        Command::Solve { scenario, solver, rho, max_nodes, out } => {
            let choice = SolverChoice::parse(&solver, admm_config(rho)?, exact_limits(max_nodes))?;
            let inst: Instance = serde_json::from_str(&std::fs::read_to_string(scenario)?)?;
            let sol = choice.solve(&inst.problem)?;
            let report = check_feasible(&inst.problem, &sol.allocation);
            let body = SolveReport { solver: choice.name(), objective: sol.objective, feasible: report.ok, allocation: &sol.allocation };
            std::fs::write(out, serde_json::to_string_pretty(&body)?)?;
            if !report.ok {
                let kinds: Vec<&str> = report.violations.iter().map(|v| v.kind.as_str()).collect();
                return Err(Error::Infeasible(kinds.join(", ")));
            }
        }
        Command::Sweep { config, param, values, solvers, seeds, rho, max_nodes, out, plot } => {
            let cfg = load_config(config.as_deref())?;
            let param = SweepParam::parse(&param)?;
            let values = parse_values(&values)?;
            let admm = admm_config(rho)?;
            let choices: Vec<SolverChoice> = solvers
                .split(',')
                .map(|s| SolverChoice::parse(s.trim(), admm, exact_limits(max_nodes)))
                .collect::<Result<_>>()?;
            let records = with_thread_limit(|| run_sweep(&cfg, param, &values, &choices, seeds))??;
            write_results_csv(&records, &out)?;
            if let Some(prefix) = plot {
                for choice in &choices {
                    let points: Vec<(f64, f64)> = records
                        .iter()
                        .filter(|r| r.solver == choice.name())
                        .map(|r| (r.sweep_param_value, r.mean_utility))
                        .collect();
                    write_plot_data(&points, &PathBuf::from(format!("{}_{}.dat", prefix.display(), choice.name())))?;
                }
            }
        }
        Command::Convergence { config, rho, seed, out, plot } => {
            let cfg = load_config(config.as_deref())?;
            let rhos = parse_rhos(&rho)?;
            let runs = with_thread_limit(|| run_convergence(&cfg, &rhos, seed, &AdmmConfig::default()))??;
            for (rho, outcome) in &runs {
                outcome.trace.write_csv(&convergence_path(&out, *rho))?;
                if let Some(prefix) = &plot {
                    let points: Vec<(f64, f64)> =
                        outcome.trace.rows.iter().map(|r| (r.iteration as f64, r.relaxed_utility)).collect();
                    let path = PathBuf::from(format!("{}_rho{}.dat", prefix.display(), crate::report::format_sig(*rho)));
                    write_plot_data(&points, &path)?;
                }
            }
        }
        Command::Simulate { config, intervals, solver, rho, max_nodes, out } => {
            let cfg = load_config(config.as_deref())?;
            let choice = SolverChoice::parse(&solver, admm_config(rho)?, exact_limits(max_nodes))?;
            let mut state = SimState::new(generate_topology(&cfg, cfg.seed)?, cfg.seed)?;
            let mut text = format!("{}\n", IntervalResult::CSV_HEADER);
            with_thread_limit(|| -> Result<()> {
                for _ in 0..intervals {
                    let r = run_interval(&mut state, &choice, cfg.seed)?;
                    text.push_str(&r.csv_row());
                    text.push('\n');
                    update_roles(&mut state, cfg.seed);
                }
                Ok(())
            })??;
            std::fs::write(out, text)?;
        }
    }
    Ok(())
}

/// Parses arguments and runs, returning the process exit code. Diagnostics
/// go to standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
