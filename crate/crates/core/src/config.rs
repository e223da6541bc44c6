//! `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Vector values are separated by
//! whitespace or commas. Unknown and repeated keys are errors.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::inla::{BfgsOptions, FitOptions, ThetaPrior};
use crate::model::HyperParameters;
use crate::simgen::SimConfig;

/// One benchmark size; `n_o` defaults to twice the number of field nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rung {
    pub n_s: usize,
    pub n_t: usize,
    pub n_o: Option<usize>,
}

impl FromStr for Rung {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split('x').collect();
        let num = |p: &str| p.parse::<usize>().map_err(|_| format!("bad ladder rung `{s}`"));
        match parts.as_slice() {
            [a, b] => Ok(Rung {
                n_s: num(a)?,
                n_t: num(b)?,
                n_o: None,
            }),
            [a, b, c] => Ok(Rung {
                n_s: num(a)?,
                n_t: num(b)?,
                n_o: Some(num(c)?),
            }),
            _ => Err(format!("bad ladder rung `{s}`, expected <n_s>x<n_t>[x<n_o>]")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub rows: usize,
    pub cols: usize,
    pub n_t: usize,
    pub n_b: usize,
    pub theta0: [f64; 4],
    pub fd_step_gradient: f64,
    pub fd_step_hessian: f64,
    pub max_iter: usize,
    pub tol_grad: f64,
    pub tol_f_rel: f64,
    pub workers: Option<usize>,
    pub seed: u64,
    pub prior_means: [f64; 4],
    pub prior_sds: [f64; 4],
    pub fixed_effect_prior_precision: f64,
    pub solver: String,
    pub layer2_split: bool,
    pub grid_rings: usize,
    pub theta_true: [f64; 4],
    pub beta_true: Option<Vec<f64>>,
    pub obs_ratio: f64,
    pub ladder: Vec<Rung>,
    pub bench_reps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rows: 8,
            cols: 8,
            n_t: 16,
            n_b: 4,
            theta0: [0.0; 4],
            fd_step_gradient: 1e-5,
            fd_step_hessian: 1e-3,
            max_iter: 200,
            tol_grad: 1e-3,
            tol_f_rel: 1e-7,
            workers: None,
            seed: 1,
            prior_means: [0.0; 4],
            prior_sds: [3.0; 4],
            fixed_effect_prior_precision: 1e-3,
            solver: "bta".into(),
            layer2_split: true,
            grid_rings: 0,
            theta_true: [std::f64::consts::LN_2, 0.0, 0.0, 0.0],
            beta_true: None,
            obs_ratio: 2.0,
            ladder: vec![
                Rung {
                    n_s: 64,
                    n_t: 32,
                    n_o: None,
                },
                Rung {
                    n_s: 64,
                    n_t: 64,
                    n_o: None,
                },
                Rung {
                    n_s: 64,
                    n_t: 128,
                    n_o: None,
                },
            ],
            bench_reps: 5,
        }
    }
}

fn scalar<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.trim().parse().map_err(|_| format!("cannot parse `{value}`"))
}

fn list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(scalar)
        .collect()
}

fn four(value: &str) -> std::result::Result<[f64; 4], String> {
    let v: Vec<f64> = list(value)?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 4 values, found {}", v.len()))
}

fn flag(value: &str) -> std::result::Result<bool, String> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, found `{other}`")),
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, line_no, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::parse(origin, line_no, format!("duplicate key `{key}`")));
            }
            cfg.set(key, value).map_err(|m| Error::parse(origin, line_no, m))?;
        }
        cfg.validate().map_err(|m| Error::Config(format!("{}: {m}", origin.display())))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "rows" => self.rows = scalar(value)?,
            "cols" => self.cols = scalar(value)?,
            "n_t" => self.n_t = scalar(value)?,
            "n_b" => self.n_b = scalar(value)?,
            "theta0" => self.theta0 = four(value)?,
            "fd_step_gradient" => self.fd_step_gradient = scalar(value)?,
            "fd_step_hessian" => self.fd_step_hessian = scalar(value)?,
            "max_iter" => self.max_iter = scalar(value)?,
            "tol_grad" => self.tol_grad = scalar(value)?,
            "tol_f_rel" => self.tol_f_rel = scalar(value)?,
            "workers" => self.workers = Some(scalar(value)?),
            "seed" => self.seed = scalar(value)?,
            "prior_means" => self.prior_means = four(value)?,
            "prior_sds" => self.prior_sds = four(value)?,
            "fixed_effect_prior_precision" => self.fixed_effect_prior_precision = scalar(value)?,
            "solver" => self.solver = value.to_string(),
            "layer2_split" => self.layer2_split = flag(value)?,
            "grid_rings" => self.grid_rings = scalar(value)?,
            "theta_true" => self.theta_true = four(value)?,
            "beta_true" => self.beta_true = Some(list(value)?),
            "obs_ratio" => self.obs_ratio = scalar(value)?,
            "ladder" => self.ladder = list(value)?,
            "bench_reps" => self.bench_reps = scalar(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.rows == 0 || self.cols == 0 || self.n_t == 0 {
            return Err("rows, cols and n_t must be positive".into());
        }
        if !(self.fd_step_gradient > 0.0) || !(self.fd_step_hessian > 0.0) {
            return Err("finite-difference steps must be positive".into());
        }
        if self.prior_sds.iter().any(|s| !(*s > 0.0)) {
            return Err("prior_sds must be positive".into());
        }
        if !(self.fixed_effect_prior_precision > 0.0) {
            return Err("fixed_effect_prior_precision must be positive".into());
        }
        if !(self.obs_ratio > 0.0) {
            return Err("obs_ratio must be positive".into());
        }
        if self.workers == Some(0) {
            return Err("workers must be at least 1".into());
        }
        if let Some(b) = &self.beta_true {
            if b.len() != self.n_b {
                return Err(format!("beta_true has {} values but n_b = {}", b.len(), self.n_b));
            }
        }
        if self.bench_reps == 0 {
            return Err("bench_reps must be at least 1".into());
        }
        Ok(())
    }

    pub fn prior(&self) -> ThetaPrior {
        ThetaPrior::Gaussian {
            means: self.prior_means,
            sds: self.prior_sds,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            bfgs: BfgsOptions {
                fd_step: self.fd_step_gradient,
                tol_grad: self.tol_grad,
                tol_f_rel: self.tol_f_rel,
                max_iter: self.max_iter,
                ..BfgsOptions::default()
            },
            fd_step_hessian: self.fd_step_hessian,
            grid_rings: self.grid_rings,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let [a, b, c, d] = self.theta_true;
        SimConfig {
            rows: self.rows,
            cols: self.cols,
            n_t: self.n_t,
            n_b: self.n_b,
            theta_true: HyperParameters::new(a, b, c, d),
            beta_true: self.beta_true.clone(),
            obs_per_timestep_ratio: self.obs_ratio,
            prior_precision_fixed: self.fixed_effect_prior_precision,
            seed: self.seed,
        }
    }

    pub fn theta0(&self) -> HyperParameters {
        let [a, b, c, d] = self.theta0;
        HyperParameters::new(a, b, c, d)
    }
}
