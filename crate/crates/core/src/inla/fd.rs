//! Central finite differences with stencils evaluated as one concurrent batch.

use crate::error::{Error, Result};
use crate::kernels::Block;
use crate::orchestrator::{evaluate_batch, Objective, StageTimes, TaskPlan};

/// Value and central-difference gradient at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPoint {
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl GradientPoint {
    pub fn norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// The `2·d + 1` points `[θ, θ + h e_1, θ − h e_1, …]`.
pub fn gradient_stencil(theta: &[f64], h: f64) -> Vec<Vec<f64>> {
    let mut pts = Vec::with_capacity(2 * theta.len() + 1);
    pts.push(theta.to_vec());
    for i in 0..theta.len() {
        let mut p = theta.to_vec();
        p[i] += h;
        pts.push(p);
        let mut m = theta.to_vec();
        m[i] -= h;
        pts.push(m);
    }
    pts
}

/// Assembles value and gradient from values on [`gradient_stencil`].
pub fn gradient_from_stencil(values: &[f64], h: f64) -> Result<GradientPoint> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::GradientFailure);
    }
    let d = (values.len() - 1) / 2;
    let gradient = (0..d)
        .map(|i| (values[1 + 2 * i] - values[2 + 2 * i]) / (2.0 * h))
        .collect();
    Ok(GradientPoint {
        value: values[0],
        gradient,
    })
}

/// `f(θ)` and `(f(θ + h e_i) − f(θ − h e_i)) / 2h`, with all `2·d + 1`
/// evaluations dispatched together. Any non-finite value is a failure.
pub fn gradient_fd<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    h: f64,
    plan: &TaskPlan,
    times: &mut StageTimes,
) -> Result<GradientPoint> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let values = evaluate_batch(obj, &gradient_stencil(theta, h), plan, times);
    gradient_from_stencil(&values, h)
}

/// Central second-difference Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianEstimate {
    pub matrix: Block,
    pub value: f64,
    /// Smallest eigenvalue; `≤ 0` flags a suspect mode.
    pub min_eigenvalue: f64,
}

impl HessianEstimate {
    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue > 0.0
    }
}

/// Diagonal entries use `(f(θ+he_i) − 2f(θ) + f(θ−he_i)) / h²`, off-diagonal
/// entries the four-point stencil
/// `(f(++) − f(+−) − f(−+) + f(−−)) / 4h²`. The result is symmetrized.
pub fn hessian_fd<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    h: f64,
    plan: &TaskPlan,
    times: &mut StageTimes,
) -> Result<HessianEstimate> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let d = theta.len();
    let shifted = |moves: &[(usize, f64)]| {
        let mut p = theta.to_vec();
        for &(i, s) in moves {
            p[i] += s * h;
        }
        p
    };
    let mut pts = vec![theta.to_vec()];
    for i in 0..d {
        pts.push(shifted(&[(i, 1.0)]));
        pts.push(shifted(&[(i, -1.0)]));
    }
    let mut pairs = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            pairs.push((i, j));
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                pts.push(shifted(&[(i, si), (j, sj)]));
            }
        }
    }
    let v = evaluate_batch(obj, &pts, plan, times);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::GradientFailure);
    }
    let f0 = v[0];
    let mut hess = Block::zeros(d, d);
    for i in 0..d {
        hess[(i, i)] = (v[1 + 2 * i] - 2.0 * f0 + v[2 + 2 * i]) / (h * h);
    }
    let base = 1 + 2 * d;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let o = base + 4 * k;
        let val = (v[o] - v[o + 1] - v[o + 2] + v[o + 3]) / (4.0 * h * h);
        hess[(i, j)] = val;
        hess[(j, i)] = val;
    }
    hess.symmetrize();
    let (eig, _) = crate::dense::symmetric_eigen(&hess);
    Ok(HessianEstimate {
        min_eigenvalue: eig.first().copied().unwrap_or(f64::INFINITY),
        matrix: hess,
        value: f0,
    })
}
