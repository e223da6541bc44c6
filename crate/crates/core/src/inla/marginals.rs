use crate::dense;
use crate::error::{Error, Result};
use crate::kernels::Block;
use crate::model::HyperParameters;
use crate::orchestrator::{timed_stage, StageTimes, STAGE_SELECTED_INVERSION};

use super::objective::InlaProblem;

/// Gaussian summary of one hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperMarginal {
    pub name: &'static str,
    pub mode_log: f64,
    pub sd_log: f64,
    /// `exp(mode_log)`.
    pub mode_natural: f64,
}

/// Means and standard deviations from the inverse of `neg_hessian`.
pub fn hyperparam_marginals(theta_star: &[f64], neg_hessian: &Block) -> Result<Vec<HyperMarginal>> {
    let d = theta_star.len();
    if neg_hessian.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: neg_hessian.rows(),
        });
    }
    let l = dense::cholesky(neg_hessian).map_err(|_| Error::HessianNotPD)?;
    let mut out = Vec::with_capacity(d);
    for (i, &m) in theta_star.iter().enumerate() {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        let col = dense::cholesky_solve(&l, &e);
        out.push(HyperMarginal {
            name: HyperParameters::NAMES.get(i).copied().unwrap_or("theta"),
            mode_log: m,
            sd_log: col[i].sqrt(),
            mode_natural: m.exp(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentMarginals {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Conditional mean `x*(θ)` and marginal standard deviations read from the
/// selected inverse of `Q_{x|y}(θ)`.
pub fn latent_marginals(problem: &InlaProblem, theta: &HyperParameters, times: &mut StageTimes) -> Result<LatentMarginals> {
    let approx = problem.gaussian_approx(theta, times)?;
    let (sel, _) = timed_stage(times, STAGE_SELECTED_INVERSION, || approx.factor.selected_inverse());
    Ok(LatentMarginals {
        sds: sel.diagonal().into_iter().map(f64::sqrt).collect(),
        means: approx.mean,
    })
}
