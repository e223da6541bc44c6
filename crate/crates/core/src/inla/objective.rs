use std::sync::Arc;

use crate::backend::{BtaBackend, Factorization, SolverBackend};
use crate::error::{Error, Result};
use crate::model::{
    assemble_conditional_precision, assemble_prior_precision, conditional_mean_rhs, Dataset, HyperParameters,
    ModelSpec,
};
use crate::orchestrator::{
    timed_stage, Objective, StageTimes, TaskPlan, STAGE_ASSEMBLY, STAGE_FACTOR_DENOMINATOR, STAGE_FACTOR_NUMERATOR,
    STAGE_OTHER, STAGE_SOLVE,
};

use super::prior::{log_prior_theta, ThetaPrior};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Terms of the Gaussian-likelihood objective at one θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveComponents {
    pub log_prior_theta: f64,
    /// `log p(x* | θ) = ½ log|Q_x| − (n/2) log 2π − ½ x*ᵀ Q_x x*`
    pub log_prior_latent: f64,
    /// `log p(y | x*, θ) = (n_o/2) log τ − (n_o/2) log 2π − (τ/2) ‖y − Ã x*‖²`
    pub log_likelihood: f64,
    /// `log p_G(x* | θ, y) = ½ log|Q_{x|y}| − (n/2) log 2π`
    pub log_conditional_at_mode: f64,
    pub log_det_prior: f64,
    pub log_det_conditional: f64,
    /// `x*ᵀ Q_x x*`
    pub prior_quadratic: f64,
    /// `‖y − Ã x*‖²`
    pub residual_sq: f64,
}

impl ObjectiveComponents {
    pub fn value(&self) -> f64 {
        -(self.log_prior_theta + self.log_prior_latent + self.log_likelihood - self.log_conditional_at_mode)
    }
}

/// `f(θ) = −log p̃(θ | y)` up to `log p(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub components: Option<ObjectiveComponents>,
    /// Set when `value` is `+∞`.
    pub failure: Option<Error>,
}

impl ObjectiveValue {
    fn infeasible(err: Error) -> Self {
        ObjectiveValue {
            value: f64::INFINITY,
            components: None,
            failure: Some(err),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Gaussian approximation of `p(x | θ, y)` at its mode.
pub struct GaussianApprox {
    pub theta: HyperParameters,
    pub mean: Vec<f64>,
    pub factor: Box<dyn Factorization>,
}

/// A latent Gaussian model bound to data, a hyperprior, and a solver.
#[derive(Clone)]
pub struct InlaProblem {
    spec: ModelSpec,
    data: Dataset,
    prior: ThetaPrior,
    backend: Arc<dyn SolverBackend>,
}

impl InlaProblem {
    pub fn new(spec: ModelSpec, data: Dataset, prior: ThetaPrior) -> Result<Self> {
        Self::with_backend(spec, data, prior, Arc::new(BtaBackend))
    }

    pub fn with_backend(
        spec: ModelSpec,
        data: Dataset,
        prior: ThetaPrior,
        backend: Arc<dyn SolverBackend>,
    ) -> Result<Self> {
        if spec.layout() != data.layout() {
            return Err(Error::InvalidModel("dataset layout does not match the model".into()));
        }
        Ok(InlaProblem {
            spec,
            data,
            prior,
            backend,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn prior(&self) -> &ThetaPrior {
        &self.prior
    }

    pub fn backend(&self) -> &dyn SolverBackend {
        self.backend.as_ref()
    }

    /// Evaluates the objective. Factorization failures yield `+∞`, never an error.
    pub fn eval_objective(&self, theta: &HyperParameters, plan: &TaskPlan) -> (ObjectiveValue, StageTimes) {
        let mut times = StageTimes::new();
        if !theta.is_finite() {
            return (
                ObjectiveValue::infeasible(Error::InvalidModel("non-finite hyperparameters".into())),
                times,
            );
        }
        let (q_x, _) = timed_stage(&mut times, STAGE_ASSEMBLY, || assemble_prior_precision(&self.spec, theta));

        let numerator = || {
            let mut t = StageTimes::new();
            let (f, _) = timed_stage(&mut t, STAGE_FACTOR_NUMERATOR, || self.backend.factorize(&q_x));
            (f.map(|f| f.logdet()), t)
        };
        let denominator = || {
            let mut t = StageTimes::new();
            let (q_xy, _) = timed_stage(&mut t, STAGE_ASSEMBLY, || {
                assemble_conditional_precision(&q_x, &self.data, theta)
            });
            let result = q_xy.and_then(|q_xy| {
                let (f, _) = timed_stage(&mut t, STAGE_FACTOR_DENOMINATOR, || self.backend.factorize(&q_xy));
                let f = f?;
                let rhs = conditional_mean_rhs(&self.data, theta);
                let (x, _) = timed_stage(&mut t, STAGE_SOLVE, || f.solve(&rhs));
                Ok((f.logdet(), x?))
            });
            (result, t)
        };
        let ((num, t_num), (den, t_den)) = plan.join(numerator, denominator);
        times.merge(&t_num);
        times.merge(&t_den);

        let (value, _) = timed_stage(&mut times, STAGE_OTHER, || -> Result<ObjectiveComponents> {
            let log_det_prior = num?;
            let (log_det_conditional, x_star) = den?;
            let n = self.spec.layout().n() as f64;
            let n_o = self.data.n_obs() as f64;
            let tau = theta.tau_y();

            let qx_x = q_x.matvec(&x_star)?;
            let prior_quadratic: f64 = x_star.iter().zip(&qx_x).map(|(a, b)| a * b).sum();
            let fitted = self.data.project(&x_star)?;
            let residual_sq: f64 = self
                .data
                .y()
                .iter()
                .zip(&fitted)
                .map(|(y, f)| (y - f) * (y - f))
                .sum();

            Ok(ObjectiveComponents {
                log_prior_theta: log_prior_theta(theta, &self.prior),
                log_prior_latent: 0.5 * log_det_prior - 0.5 * n * LN_2PI - 0.5 * prior_quadratic,
                log_likelihood: 0.5 * n_o * theta.log_tau_y - 0.5 * n_o * LN_2PI - 0.5 * tau * residual_sq,
                log_conditional_at_mode: 0.5 * log_det_conditional - 0.5 * n * LN_2PI,
                log_det_prior,
                log_det_conditional,
                prior_quadratic,
                residual_sq,
            })
        });
        let out = match value {
            Ok(c) => ObjectiveValue {
                value: c.value(),
                components: Some(c),
                failure: None,
            },
            Err(e) => ObjectiveValue::infeasible(e),
        };
        (out, times)
    }

    /// Conditional mean and factor of `Q_{x|y}(θ)`.
    pub fn gaussian_approx(&self, theta: &HyperParameters, times: &mut StageTimes) -> Result<GaussianApprox> {
        let (q_xy, _) = timed_stage(times, STAGE_ASSEMBLY, || {
            let q_x = assemble_prior_precision(&self.spec, theta);
            assemble_conditional_precision(&q_x, &self.data, theta)
        });
        let q_xy = q_xy?;
        let (factor, _) = timed_stage(times, STAGE_FACTOR_DENOMINATOR, || self.backend.factorize(&q_xy));
        let factor = factor?;
        let rhs = conditional_mean_rhs(&self.data, theta);
        let (mean, _) = timed_stage(times, STAGE_SOLVE, || factor.solve(&rhs));
        Ok(GaussianApprox {
            theta: *theta,
            mean: mean?,
            factor,
        })
    }
}

impl Objective for InlaProblem {
    fn dim(&self) -> usize {
        HyperParameters::DIM
    }

    fn evaluate(&self, theta: &[f64], plan: &TaskPlan) -> (f64, StageTimes) {
        match HyperParameters::from_slice(theta) {
            Ok(th) => {
                let (v, t) = self.eval_objective(&th, plan);
                (v.value, t)
            }
            Err(_) => (f64::INFINITY, StageTimes::new()),
        }
    }
}

/// Evaluates every θ on the pool. Order matches the input; failures are `+∞`
/// entries.
pub fn parallel_map_objective(
    problem: &InlaProblem,
    thetas: &[HyperParameters],
    plan: &TaskPlan,
    times: &mut StageTimes,
) -> Vec<ObjectiveValue> {
    let results = plan.map(thetas, |th| problem.eval_objective(th, plan));
    results
        .into_iter()
        .map(|(v, t)| {
            times.merge(&t);
            v
        })
        .collect()
}
