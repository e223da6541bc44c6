//! Posterior-mode search over θ, Hessian-based hyperparameter marginals and
//! empirical-Bayes latent marginals.

mod bfgs;
mod fd;
mod grid;
mod marginals;
mod objective;
mod prior;

use std::time::{Duration, Instant};

pub use bfgs::{bfgs_minimize, BfgsOptions, BfgsResult, BfgsStatus, TraceEntry};
pub use fd::{gradient_fd, gradient_from_stencil, gradient_stencil, hessian_fd, GradientPoint, HessianEstimate};
pub use grid::{explore_theta_grid, GridPoint};
pub use marginals::{hyperparam_marginals, latent_marginals, HyperMarginal, LatentMarginals};
pub use objective::{parallel_map_objective, GaussianApprox, InlaProblem, ObjectiveComponents, ObjectiveValue};
pub use prior::{log_normal_pdf, log_prior_theta, ThetaPrior};

use crate::error::Result;
use crate::kernels::Block;
use crate::model::HyperParameters;
use crate::orchestrator::{timed_stage, StageTimes, TaskPlan, STAGE_OTHER};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub bfgs: BfgsOptions,
    pub fd_step_hessian: f64,
    /// Number of exploration rings around the mode; 0 disables exploration.
    pub grid_rings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            bfgs: BfgsOptions::default(),
            fd_step_hessian: 1e-3,
            grid_rings: 0,
        }
    }
}

/// Output of [`fit`].
#[derive(Debug, Clone)]
pub struct InferenceReport {
    pub theta_mode: HyperParameters,
    pub objective_at_mode: f64,
    pub neg_hessian: Block,
    pub hessian_min_eigenvalue: f64,
    /// `None` when the Hessian at the mode is not positive definite.
    pub hyper_marginals: Option<Vec<HyperMarginal>>,
    pub latent_means: Vec<f64>,
    pub latent_sds: Vec<f64>,
    pub status: BfgsStatus,
    pub iterations: usize,
    pub function_evaluations: usize,
    pub final_gradient_norm: f64,
    pub trace: Vec<TraceEntry>,
    pub grid: Vec<GridPoint>,
    pub stage_times: StageTimes,
    pub wall_time: Duration,
}

impl InferenceReport {
    pub fn hessian_is_positive_definite(&self) -> bool {
        self.hyper_marginals.is_some()
    }

    pub fn converged(&self) -> bool {
        self.status == BfgsStatus::Converged
    }
}

/// Runs mode search, Hessian, hyperparameter marginals, latent marginals and
/// optional ring exploration.
pub fn fit(problem: &InlaProblem, theta0: &HyperParameters, opts: &FitOptions, plan: &TaskPlan) -> Result<InferenceReport> {
    let start = Instant::now();
    let mut times = StageTimes::new();
    let opt = bfgs_minimize(problem, &theta0.to_array(), &opts.bfgs, plan, &mut times)?;
    let theta_mode = HyperParameters::from_slice(&opt.theta)?;

    let hess = hessian_fd(problem, &opt.theta, opts.fd_step_hessian, plan, &mut times)?;
    let mut evaluations = opt.evaluations + 1 + 2 * 4 + 4 * 6;
    let (hyper_marginals, _) = timed_stage(&mut times, STAGE_OTHER, || {
        hyperparam_marginals(&opt.theta, &hess.matrix).ok()
    });

    let latent = latent_marginals(problem, &theta_mode, &mut times)?;

    let grid = if opts.grid_rings > 0 && hyper_marginals.is_some() {
        let g = explore_theta_grid(problem, &opt.theta, &hess.matrix, opts.grid_rings, plan, &mut times)?;
        evaluations += g.len();
        g
    } else {
        Vec::new()
    };

    Ok(InferenceReport {
        theta_mode,
        objective_at_mode: opt.value,
        hessian_min_eigenvalue: hess.min_eigenvalue,
        neg_hessian: hess.matrix,
        hyper_marginals,
        latent_means: latent.means,
        latent_sds: latent.sds,
        status: opt.status,
        iterations: opt.iterations,
        function_evaluations: evaluations,
        final_gradient_norm: opt.grad_norm(),
        trace: opt.trace,
        grid,
        stage_times: times,
        wall_time: start.elapsed(),
    })
}
