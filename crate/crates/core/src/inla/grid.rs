use crate::dense;
use crate::error::{Error, Result};
use crate::kernels::Block;
use crate::orchestrator::{evaluate_batch, Objective, StageTimes, TaskPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    /// Ring number, starting at 1.
    pub ring: usize,
    /// Eigenvector index, ascending eigenvalue order.
    pub direction: usize,
    /// `+1` or `-1`.
    pub sign: f64,
    pub theta: Vec<f64>,
    pub value: f64,
}

/// Points `θ* ± r·δ_k·v_k` for rings `r = 1..=rings`, with `v_k` the
/// eigenvectors of `neg_hessian` and `δ_k = 2 / √λ_k`, so that the quadratic
/// model rises by `2·r²` at ring `r`. Failed evaluations are `+∞`.
pub fn explore_theta_grid<O: Objective + ?Sized>(
    obj: &O,
    theta_star: &[f64],
    neg_hessian: &Block,
    rings: usize,
    plan: &TaskPlan,
    times: &mut StageTimes,
) -> Result<Vec<GridPoint>> {
    let d = theta_star.len();
    if neg_hessian.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: neg_hessian.rows(),
        });
    }
    let (values, vectors) = dense::symmetric_eigen(neg_hessian);
    if values.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::HessianNotPD);
    }
    let mut points = Vec::with_capacity(2 * d * rings);
    for ring in 1..=rings {
        for (k, &lambda) in values.iter().enumerate() {
            let delta = ring as f64 * 2.0 / lambda.sqrt();
            for sign in [1.0, -1.0] {
                let theta = (0..d).map(|i| theta_star[i] + sign * delta * vectors[(i, k)]).collect();
                points.push(GridPoint {
                    ring,
                    direction: k,
                    sign,
                    theta,
                    value: f64::NAN,
                });
            }
        }
    }
    let thetas: Vec<Vec<f64>> = points.iter().map(|p| p.theta.clone()).collect();
    let vals = evaluate_batch(obj, &thetas, plan, times);
    for (p, v) in points.iter_mut().zip(vals) {
        p.value = v;
    }
    Ok(points)
}
