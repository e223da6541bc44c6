//! Block tridiagonal arrowhead (BTA) linear algebra and INLA-style inference
//! for spatio-temporal latent Gaussian models.
//!
//! * [`bta`]: factorization, solves, log-determinant and selected inversion;
//! * [`model`]: prior and conditional precision assembly;
//! * [`inla`]: objective, BFGS mode search, Hessian and marginals;
//! * [`simgen`]: seeded synthetic datasets;
//! * [`orchestrator`]: worker pool and stage timing;
//! * [`backend`]: named solver backends, selected by the `solver` config key.

pub mod backend;
pub mod bench;
pub mod bta;
pub mod commands;
pub mod config;
pub mod dense;
pub mod error;
pub mod fixtures;
pub mod inla;
pub mod io;
pub mod kernels;
pub mod model;
pub mod orchestrator;
pub mod selftest;
pub mod simgen;

pub use error::{Error, Result};
