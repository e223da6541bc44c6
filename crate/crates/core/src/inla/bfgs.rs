//! BFGS with finite-difference gradients and a bracketing weak-Wolfe line
//! search.
//!
//! Each line-search trial evaluates the trial point together with its
//! gradient stencil as one batch of `2·d + 1` tasks.

use crate::error::{Error, Result};
use crate::orchestrator::{evaluate_batch, Objective, StageTimes, TaskPlan};

use super::fd::{gradient_fd, gradient_from_stencil, gradient_stencil, GradientPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOptions {
    pub fd_step: f64,
    pub tol_grad: f64,
    pub tol_f_rel: f64,
    pub max_iter: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_trials: usize,
    /// Upper bound on the infinity-norm of the first trial step.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            fd_step: 1e-5,
            tol_grad: 1e-3,
            tol_f_rel: 1e-7,
            max_iter: 200,
            c1: 1e-4,
            c2: 0.9,
            max_trials: 30,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfgsStatus {
    Converged,
    MaxIterations,
    LineSearchFailure { backtracks: usize },
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub status: BfgsStatus,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

impl BfgsResult {
    pub fn grad_norm(&self) -> f64 {
        norm(&self.gradient)
    }

    pub fn error(&self) -> Option<Error> {
        match self.status {
            BfgsStatus::LineSearchFailure { backtracks } => Some(Error::LineSearchFailure { backtracks }),
            _ => None,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Dense inverse-Hessian approximation.
struct InverseHessian {
    d: usize,
    h: Vec<f64>,
    scaled: bool,
}

impl InverseHessian {
    fn identity(d: usize) -> Self {
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            h[i * d + i] = 1.0;
        }
        InverseHessian { d, h, scaled: false }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.d).map(|i| dot(&self.h[i * self.d..(i + 1) * self.d], v)).collect()
    }

    /// Standard BFGS inverse update; skipped when the curvature `sᵀy` is not
    /// safely positive.
    fn update(&mut self, s: &[f64], y: &[f64]) {
        let sy = dot(s, y);
        if !(sy > 1e-12 * norm(s) * norm(y)) {
            return;
        }
        let d = self.d;
        if !self.scaled {
            let gamma = sy / dot(y, y);
            self.h.iter_mut().for_each(|v| *v *= gamma);
            self.scaled = true;
        }
        let rho = 1.0 / sy;
        let hy = self.apply(y);
        let yhy = dot(y, &hy);
        let mut next = self.h.clone();
        for i in 0..d {
            for j in 0..d {
                next[i * d + j] +=
                    -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
            }
        }
        self.h = next;
    }
}

struct Accepted {
    theta: Vec<f64>,
    point: GradientPoint,
    step: f64,
}

fn line_search<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    current: &GradientPoint,
    dir: &[f64],
    opts: &BfgsOptions,
    plan: &TaskPlan,
    times: &mut StageTimes,
    evaluations: &mut usize,
) -> std::result::Result<Accepted, usize> {
    let slope0 = dot(&current.gradient, dir);
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut alpha = (opts.max_step / inf_norm(dir)).min(1.0);
    for trial in 0..opts.max_trials {
        let cand: Vec<f64> = theta.iter().zip(dir).map(|(t, p)| t + alpha * p).collect();
        let stencil = gradient_stencil(&cand, opts.fd_step);
        *evaluations += stencil.len();
        let values = evaluate_batch(obj, &stencil, plan, times);
        let f_new = values[0];
        let armijo = f_new.is_finite() && f_new <= current.value + opts.c1 * alpha * slope0;
        if !armijo {
            hi = alpha;
            alpha = 0.5 * (lo + hi);
            continue;
        }
        let point = match gradient_from_stencil(&values, opts.fd_step) {
            Ok(p) => p,
            Err(_) => {
                hi = alpha;
                alpha = 0.5 * (lo + hi);
                continue;
            }
        };
        if dot(&point.gradient, dir) < opts.c2 * slope0 {
            lo = alpha;
            alpha = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * alpha };
            // A bracket with no room left: accept the sufficient-decrease point.
            if trial + 1 == opts.max_trials {
                return Ok(Accepted {
                    theta: cand,
                    point,
                    step: lo,
                });
            }
            continue;
        }
        return Ok(Accepted {
            theta: cand,
            point,
            step: alpha,
        });
    }
    Err(opts.max_trials)
}

/// Minimizes `obj` from `theta0`.
///
/// Stops when `‖∇f‖ ≤ tol_grad` and the last accepted step changed `f` by at
/// most `tol_f_rel` relative, after `max_iter` accepted steps, or when the
/// line search fails. Only an infeasible starting point is an `Err`.
pub fn bfgs_minimize<O: Objective + ?Sized>(
    obj: &O,
    theta0: &[f64],
    opts: &BfgsOptions,
    plan: &TaskPlan,
    times: &mut StageTimes,
) -> Result<BfgsResult> {
    let d = theta0.len();
    let mut evaluations = 2 * d + 1;
    let mut point = gradient_fd(obj, theta0, opts.fd_step, plan, times)?;
    let mut theta = theta0.to_vec();
    let mut hinv = InverseHessian::identity(d);
    let mut trace = Vec::new();
    let mut last_rel_change: Option<f64> = None;

    let converged = |p: &GradientPoint, rel: Option<f64>| p.norm() <= opts.tol_grad && rel.is_none_or(|r| r <= opts.tol_f_rel);

    let mut iteration = 0;
    let status = loop {
        if converged(&point, last_rel_change) {
            break BfgsStatus::Converged;
        }
        if iteration >= opts.max_iter {
            break BfgsStatus::MaxIterations;
        }
        let mut dir: Vec<f64> = hinv.apply(&point.gradient).iter().map(|v| -v).collect();
        if !(dot(&dir, &point.gradient) < 0.0) {
            hinv = InverseHessian::identity(d);
            dir = point.gradient.iter().map(|v| -v).collect();
        }
        let accepted = match line_search(obj, &theta, &point, &dir, opts, plan, times, &mut evaluations) {
            Ok(a) => a,
            Err(backtracks) => break BfgsStatus::LineSearchFailure { backtracks },
        };
        iteration += 1;
        let s: Vec<f64> = accepted.theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = accepted
            .point
            .gradient
            .iter()
            .zip(&point.gradient)
            .map(|(a, b)| a - b)
            .collect();
        hinv.update(&s, &y);
        last_rel_change = Some((point.value - accepted.point.value).abs() / point.value.abs().max(1.0));
        theta = accepted.theta;
        point = accepted.point;
        trace.push(TraceEntry {
            iteration,
            value: point.value,
            grad_norm: point.norm(),
            step: accepted.step,
        });
    };

    Ok(BfgsResult {
        theta,
        value: point.value,
        gradient: point.gradient,
        status,
        iterations: iteration,
        evaluations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::FnObjective;

    fn plan() -> TaskPlan {
        TaskPlan::new(2, false).unwrap()
    }

    #[test]
    fn quadratic_converges_quickly() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let obj = FnObjective::new(4, move |t: &[f64]| 0.5 * t.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        let opts = BfgsOptions {
            max_step: 10.0,
            ..Default::default()
        };
        let r = bfgs_minimize(&obj, &[0.0; 4], &opts, &plan(), &mut StageTimes::new()).unwrap();
        assert_eq!(r.status, BfgsStatus::Converged);
        assert!(r.iterations <= 3, "iterations = {}", r.iterations);
        for (a, b) in r.theta.iter().zip(&c) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn rosenbrock_4d() {
        let obj = FnObjective::new(4, |x: &[f64]| {
            (0..3)
                .map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2))
                .sum()
        });
        let opts = BfgsOptions {
            tol_grad: 1e-6,
            tol_f_rel: 1e-14,
            fd_step: 1e-6,
            ..Default::default()
        };
        let r = bfgs_minimize(&obj, &[-1.2, 1.0, -1.2, 1.0], &opts, &plan(), &mut StageTimes::new()).unwrap();
        assert!(r.value < 1e-8, "f = {} after {} iterations ({:?})", r.value, r.iterations, r.status);
        assert!(r.iterations <= 200);
        for w in r.trace.windows(2) {
            assert!(w[1].value <= w[0].value);
        }
    }

    #[test]
    fn zero_iterations_returns_start() {
        let obj = FnObjective::new(2, |t: &[f64]| (t[0] - 1.0).powi(2) + t[1] * t[1]);
        let opts = BfgsOptions {
            max_iter: 0,
            ..Default::default()
        };
        let r = bfgs_minimize(&obj, &[0.0, 0.0], &opts, &plan(), &mut StageTimes::new()).unwrap();
        assert_eq!(r.status, BfgsStatus::MaxIterations);
        assert_eq!(r.theta, vec![0.0, 0.0]);
        assert!(r.trace.is_empty());
    }

    #[test]
    fn infeasible_region_is_avoided() {
        // minimum at 1.0, infeasible beyond 1.5
        let obj = FnObjective::new(1, |t: &[f64]| if t[0] > 1.5 { f64::INFINITY } else { (t[0] - 1.0).powi(2) });
        let opts = BfgsOptions {
            max_step: 100.0,
            ..Default::default()
        };
        let r = bfgs_minimize(&obj, &[-20.0], &opts, &plan(), &mut StageTimes::new()).unwrap();
        assert_eq!(r.status, BfgsStatus::Converged);
        assert!((r.theta[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn infeasible_start_is_an_error() {
        let obj = FnObjective::new(1, |_t: &[f64]| f64::INFINITY);
        let r = bfgs_minimize(&obj, &[0.0], &BfgsOptions::default(), &plan(), &mut StageTimes::new());
        assert!(matches!(r, Err(Error::GradientFailure)));
    }

    #[test]
    fn unbounded_descent_reports_line_search_failure_or_max_iter() {
        let obj = FnObjective::new(1, |t: &[f64]| if t[0].abs() < 1e-300 { 0.0 } else { -t[0].abs().ln() });
        let opts = BfgsOptions {
            max_iter: 5,
            max_trials: 3,
            ..Default::default()
        };
        let r = bfgs_minimize(&obj, &[1.0], &opts, &plan(), &mut StageTimes::new()).unwrap();
        assert_ne!(r.status, BfgsStatus::Converged);
    }
}
