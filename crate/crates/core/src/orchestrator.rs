//! Task scheduling and stage timing.
//!
//! Work is scheduled in three layers:
//!
//! 1. batches of independent objective evaluations (finite-difference
//!    stencils, Hessian stencils, exploration points) are spread over a
//!    bounded worker pool;
//! 2. inside one evaluation, the prior-precision path and the
//!    conditional-precision path may run as two subtasks;
//! 3. the dense block kernels themselves are sequential.
//!
//! Every task is a pure function of its inputs, so results do not depend on
//! the number of workers. Timers are collected per task and merged by the
//! caller after each batch.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const STAGE_ASSEMBLY: &str = "assembly";
pub const STAGE_FACTOR_NUMERATOR: &str = "factorization_numerator";
pub const STAGE_FACTOR_DENOMINATOR: &str = "factorization_denominator";
pub const STAGE_SOLVE: &str = "solve";
pub const STAGE_SELECTED_INVERSION: &str = "selected_inversion";
pub const STAGE_OTHER: &str = "other";

pub const STAGES: [&str; 6] = [
    STAGE_ASSEMBLY,
    STAGE_FACTOR_NUMERATOR,
    STAGE_FACTOR_DENOMINATOR,
    STAGE_SOLVE,
    STAGE_SELECTED_INVERSION,
    STAGE_OTHER,
];

/// Named duration accumulators.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimes {
    stages: BTreeMap<&'static str, (u64, Duration)>,
}

impl StageTimes {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, name: &'static str, d: Duration) {
        let e = self.stages.entry(name).or_insert((0, Duration::ZERO));
        e.0 += 1;
        e.1 += d;
    }

    pub fn merge(&mut self, other: &StageTimes) {
        for (name, (count, d)) in &other.stages {
            let e = self.stages.entry(name).or_insert((0, Duration::ZERO));
            e.0 += count;
            e.1 += *d;
        }
    }

    pub fn count(&self, name: &str) -> u64 {
        self.stages.get(name).map_or(0, |e| e.0)
    }

    pub fn total(&self, name: &str) -> Duration {
        self.stages.get(name).map_or(Duration::ZERO, |e| e.1)
    }

    pub fn grand_total(&self) -> Duration {
        self.stages.values().map(|e| e.1).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, u64, Duration)> + '_ {
        self.stages.iter().map(|(k, v)| (*k, v.0, v.1))
    }

    /// `stage,count,total_seconds,fraction`, listing the standard stages first.
    pub fn to_table(&self) -> String {
        let total = self.grand_total().as_secs_f64();
        let mut out = String::from("stage,count,total_seconds,fraction\n");
        let extra = self.stages.keys().filter(|k| !STAGES.contains(k)).copied();
        for name in STAGES.iter().copied().chain(extra) {
            let secs = self.total(name).as_secs_f64();
            let frac = if total > 0.0 { secs / total } else { 0.0 };
            let _ = writeln!(out, "{name},{},{secs:.6},{frac:.4}", self.count(name));
        }
        out
    }
}

/// Runs `work`, records its duration under `name`, and passes the result through.
pub fn timed_stage<R>(times: &mut StageTimes, name: &'static str, work: impl FnOnce() -> R) -> (R, Duration) {
    let start = Instant::now();
    let r = work();
    let d = start.elapsed();
    times.record(name, d);
    (r, d)
}

/// Worker pool configuration shared by all batched evaluations.
#[derive(Clone)]
pub struct TaskPlan {
    workers: usize,
    layer2_split: bool,
    pool: Arc<rayon::ThreadPool>,
}

impl std::fmt::Debug for TaskPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaskPlan")
            .field("workers", &self.workers)
            .field("layer2_split", &self.layer2_split)
            .finish()
    }
}

impl TaskPlan {
    pub fn new(workers: usize, layer2_split: bool) -> Result<Self> {
        if workers == 0 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("bta-worker-{i}"))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(TaskPlan {
            workers,
            layer2_split,
            pool: Arc::new(pool),
        })
    }

    pub fn sequential() -> Self {
        Self::new(1, false).expect("single-thread pool")
    }

    /// `min(available cores, 2·dim + 1)`.
    pub fn default_workers(dim: usize) -> usize {
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        cores.min(2 * dim + 1).max(1)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn layer2_split(&self) -> bool {
        self.layer2_split
    }

    /// Order-preserving parallel map on the pool.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(&f).collect())
    }

    /// Runs two closures, concurrently when the layer-2 split is enabled.
    pub fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        if self.layer2_split {
            self.pool.install(|| rayon::join(a, b))
        } else {
            (a(), b())
        }
    }
}

/// A scalar objective over a hyperparameter vector.
///
/// `+∞` signals an infeasible point. Implementations report per-stage timings
/// for the evaluation alongside the value.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, theta: &[f64], plan: &TaskPlan) -> (f64, StageTimes);
}

/// Wraps a plain closure as an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnObjective { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, theta: &[f64], _plan: &TaskPlan) -> (f64, StageTimes) {
        (((self.f)(theta)), StageTimes::new())
    }
}

/// Evaluates every point on the pool; output order matches input order.
/// NaN results are reported as `+∞`.
pub fn evaluate_batch<O: Objective + ?Sized>(
    obj: &O,
    thetas: &[Vec<f64>],
    plan: &TaskPlan,
    times: &mut StageTimes,
) -> Vec<f64> {
    let results = plan.map(thetas, |t| obj.evaluate(t, plan));
    results
        .into_iter()
        .map(|(v, t)| {
            times.merge(&t);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        })
        .collect()
}
