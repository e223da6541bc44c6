//! Subcommand implementations behind the `bta-inla` binary.
//!
//! Exit codes: `fit` returns 0 on convergence, 2 when the iteration limit
//! stopped the optimizer and 1 on any error; the other subcommands return 0
//! or 1.

use std::path::Path;

use crate::backend::BackendRegistry;
use crate::bench::{bench_csv, run_benchmark, BenchRow};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::inla::{fit, BfgsStatus, InferenceReport, InlaProblem};
use crate::io;
use crate::orchestrator::TaskPlan;
use crate::selftest::{run_selftest, selftest_table};
use crate::simgen::{generate_dataset, Simulation};

pub const WORKERS_ENV: &str = "BTA_INLA_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;

/// Worker count: explicit flag, then the config key, then the environment
/// variable, then `min(cores, 2·d + 1)`.
pub fn resolve_workers(flag: Option<usize>, cfg: &RunConfig) -> Result<usize> {
    if let Some(w) = flag.or(cfg.workers) {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .ok()
            .filter(|&w: &usize| w > 0)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, found `{v}`"))),
        Err(_) => Ok(TaskPlan::default_workers(4)),
    }
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Simulation> {
    let sim = generate_dataset(&cfg.sim_config())?;
    io::write_dataset(out, &sim.data)?;
    io::write_text(&out.join("truth.csv"), &io::truth_csv(&sim.truth))?;
    Ok(sim)
}

pub fn cmd_simulate(config: &Path, out: &Path) -> Result<i32> {
    let cfg = RunConfig::load(config)?;
    let sim = simulate(&cfg, out)?;
    println!("wrote {} observations to {}", sim.data.n_obs(), out.display());
    Ok(EXIT_OK)
}

pub fn fit_exit_code(report: &InferenceReport) -> i32 {
    match report.status {
        BfgsStatus::Converged => EXIT_OK,
        BfgsStatus::MaxIterations => EXIT_MAX_ITER,
        BfgsStatus::LineSearchFailure { .. } => EXIT_ERROR,
    }
}

/// Loads data, fits, and writes the report files. The report is written for
/// every optimizer outcome.
pub fn run_fit(cfg: &RunConfig, data_dir: &Path, out: &Path, workers: usize) -> Result<InferenceReport> {
    let spec = io::load_spec(data_dir, cfg.rows, cfg.cols, cfg.n_t, cfg.n_b, cfg.fixed_effect_prior_precision)?;
    let data = io::read_dataset(data_dir, spec.layout())?;
    let backend = BackendRegistry::with_defaults().get(&cfg.solver)?;
    let problem = InlaProblem::with_backend(spec, data, cfg.prior(), backend)?;
    let plan = TaskPlan::new(workers, cfg.layer2_split)?;
    let report = fit(&problem, &cfg.theta0(), &cfg.fit_options(), &plan)?;
    io::write_report(out, &report)?;
    Ok(report)
}

pub fn cmd_fit(config: &Path, data: &Path, out: &Path, workers: Option<usize>) -> Result<i32> {
    let cfg = RunConfig::load(config)?;
    let workers = resolve_workers(workers, &cfg)?;
    let report = run_fit(&cfg, data, out, workers)?;
    print!("{}", io::hyper_csv(&report));
    eprintln!(
        "status {:?} after {} iterations, {} evaluations, |grad| = {:.3e}",
        report.status, report.iterations, report.function_evaluations, report.final_gradient_norm
    );
    if !report.hessian_is_positive_definite() {
        eprintln!("warning: {}", Error::HessianNotPD);
    }
    if let Some(e) = match report.status {
        BfgsStatus::LineSearchFailure { backtracks } => Some(Error::LineSearchFailure { backtracks }),
        _ => None,
    } {
        eprintln!("error: {e}");
    }
    Ok(fit_exit_code(&report))
}

pub fn cmd_benchmark(config: &Path, out: &Path) -> Result<(i32, Vec<BenchRow>)> {
    let cfg = RunConfig::load(config)?;
    let rows = run_benchmark(&cfg.ladder, cfg.n_b, cfg.bench_reps, cfg.seed)?;
    let csv = bench_csv(&rows);
    io::write_text(out, &csv)?;
    print!("{csv}");
    Ok((EXIT_OK, rows))
}

pub fn cmd_selftest() -> i32 {
    let results = run_selftest();
    print!("{}", selftest_table(&results));
    match results.iter().find(|r| !r.passed) {
        Some(r) => {
            eprintln!("selftest failed: {}: {}", r.name, r.detail);
            EXIT_ERROR
        }
        None => EXIT_OK,
    }
}
