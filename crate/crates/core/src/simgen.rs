//! Seeded synthetic datasets `y = Zβ + Au + ε` on a lattice model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bta::{bta_factorize, bta_solve_upper, BtaFactor, BtaLayout};
use crate::error::{Error, Result};
use crate::kernels::Block;
use crate::model::{assemble_prior_precision, build_lattice_spec, Dataset, HyperParameters, ModelSpec, Triplets};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub rows: usize,
    pub cols: usize,
    pub n_t: usize,
    pub n_b: usize,
    pub theta_true: HyperParameters,
    /// Drawn uniformly from `[−5, 5]` when absent.
    pub beta_true: Option<Vec<f64>>,
    pub obs_per_timestep_ratio: f64,
    pub prior_precision_fixed: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            rows: 8,
            cols: 8,
            n_t: 16,
            n_b: 4,
            theta_true: HyperParameters::new(std::f64::consts::LN_2, 0.0, 0.0, 0.0),
            beta_true: None,
            obs_per_timestep_ratio: 2.0,
            prior_precision_fixed: 1e-3,
            seed: 1,
        }
    }
}

/// Values used to generate a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub theta: HyperParameters,
    pub beta: Vec<f64>,
    /// Spatio-temporal field, length `n_s·n_t`.
    pub u: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub spec: ModelSpec,
    pub data: Dataset,
    pub truth: Truth,
}

/// Draws `u ~ N(0, Q⁻¹)` by solving `Lᵀ u = z` with `z` standard normal.
pub fn sample_gmrf<R: Rng + ?Sized>(l: &BtaFactor, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = (0..l.layout().n()).map(|_| rng.sample(StandardNormal)).collect();
    bta_solve_upper(l, &z).expect("length matches layout")
}

/// Per time step, `round(ratio·n_s)` sites drawn uniformly with replacement.
/// Returns the unit-weight projection and the spatial node of every row.
pub fn sample_sites<R: Rng + ?Sized>(layout: BtaLayout, ratio: f64, rng: &mut R) -> Result<(Triplets, Vec<usize>)> {
    let per_step = (ratio * layout.n_s() as f64).round() as usize;
    let n_o = per_step * layout.n_t();
    let mut entries = Vec::with_capacity(n_o);
    let mut nodes = Vec::with_capacity(n_o);
    for t in 0..layout.n_t() {
        for _ in 0..per_step {
            let k = rng.random_range(0..layout.n_s());
            entries.push((nodes.len(), t * layout.n_s() + k, 1.0));
            nodes.push(k);
        }
    }
    Ok((Triplets::new(n_o, layout.n_st(), entries)?, nodes))
}

fn standardized(values: Vec<f64>) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    values.into_iter().map(|v| (v - mean) / sd).collect()
}

/// Column 0 is the intercept. Column `j ≥ 1` cycles through the standardized
/// node transforms `x`, `sin 2πy`, `y`, `sin 2πx` of the unit-square lattice
/// coordinates, plus uniform noise on `[−0.1, 0.1]` per observation.
pub fn build_covariates<R: Rng + ?Sized>(rows: usize, cols: usize, nodes: &[usize], n_b: usize, rng: &mut R) -> Block {
    let unit = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    let xs: Vec<f64> = (0..rows * cols).map(|k| unit(k % cols, cols)).collect();
    let ys: Vec<f64> = (0..rows * cols).map(|k| unit(k / cols, rows)).collect();
    let tau = 2.0 * std::f64::consts::PI;
    let transforms = [
        standardized(xs.clone()),
        standardized(ys.iter().map(|y| (tau * y).sin()).collect()),
        standardized(ys.clone()),
        standardized(xs.iter().map(|x| (tau * x).sin()).collect()),
    ];
    let mut z = Block::zeros(nodes.len(), n_b);
    for (r, &k) in nodes.iter().enumerate() {
        for j in 0..n_b {
            z[(r, j)] = if j == 0 {
                1.0
            } else {
                transforms[(j - 1) % transforms.len()][k] + rng.random_range(-0.1..=0.1)
            };
        }
    }
    z
}

/// `y = Zβ + Au + ε` with `ε_i ~ N(0, 1/τ)`; an infinite `τ` gives no noise.
pub fn observe<R: Rng + ?Sized>(a: &Triplets, z: &Block, u: &[f64], beta: &[f64], tau: f64, rng: &mut R) -> Vec<f64> {
    let mut y: Vec<f64> = (0..a.rows).map(|r| z.row(r).iter().zip(beta).map(|(zi, b)| zi * b).sum()).collect();
    for &(r, c, v) in &a.entries {
        y[r] += v * u[c];
    }
    let sd = tau.recip().sqrt();
    for yi in &mut y {
        let e: f64 = rng.sample(StandardNormal);
        *yi += sd * e;
    }
    y
}

pub fn generate_dataset(cfg: &SimConfig) -> Result<Simulation> {
    if !(cfg.obs_per_timestep_ratio > 0.0) {
        return Err(Error::Config("observation ratio must be positive".into()));
    }
    if cfg.n_b == 0 {
        return Err(Error::Config("simulation needs n_b >= 1 for the intercept".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spec = build_lattice_spec(cfg.rows, cfg.cols, cfg.n_t, cfg.n_b, cfg.prior_precision_fixed)?;
    let beta = match &cfg.beta_true {
        Some(b) if b.len() != cfg.n_b => {
            return Err(Error::DimensionMismatch {
                expected: cfg.n_b,
                found: b.len(),
            })
        }
        Some(b) => b.clone(),
        None => (0..cfg.n_b).map(|_| rng.random_range(-5.0..=5.0)).collect(),
    };
    let field_spec = spec.with_fixed_effects(0, cfg.prior_precision_fixed)?;
    let l = bta_factorize(&assemble_prior_precision(&field_spec, &cfg.theta_true))?;
    let u = sample_gmrf(&l, &mut rng);
    let (a, nodes) = sample_sites(spec.layout(), cfg.obs_per_timestep_ratio, &mut rng)?;
    let z = build_covariates(cfg.rows, cfg.cols, &nodes, cfg.n_b, &mut rng);
    let y = observe(&a, &z, &u, &beta, cfg.theta_true.tau_y(), &mut rng);
    let data = Dataset::new(spec.layout(), y, a, z)?;
    Ok(Simulation {
        spec,
        data,
        truth: Truth {
            theta: cfg.theta_true,
            beta,
            u,
        },
    })
}
