//! Interchangeable precision-matrix solvers, registered by name.
//!
//! The inference engine only needs four things from a factorized precision
//! matrix: its log-determinant, a solve, a back-substitution with `Lᵀ` (for
//! sampling), and the selected inverse. [`SolverBackend`] implementations
//! provide these; [`BackendRegistry`] maps configuration names to them.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::bta::{
    bta_factorize, bta_logdet, bta_selected_inverse, bta_solve, bta_solve_upper, BtaFactor, BtaLayout,
    BtaMatrix, SelectedInverse,
};
use crate::dense;
use crate::error::{Error, Result};
use crate::kernels::Block;

pub trait Factorization: Send + Sync {
    fn layout(&self) -> BtaLayout;

    fn logdet(&self) -> f64;

    /// Solves `Q x = b`.
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>>;

    /// Solves `Lᵀ x = z`.
    fn solve_upper(&self, z: &[f64]) -> Result<Vec<f64>>;

    fn selected_inverse(&self) -> SelectedInverse;
}

pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn factorize(&self, q: &BtaMatrix) -> Result<Box<dyn Factorization>>;
}

/// Block tridiagonal arrowhead Cholesky with selected inversion.
#[derive(Debug, Default, Clone, Copy)]
pub struct BtaBackend;

impl Factorization for BtaFactor {
    fn layout(&self) -> BtaLayout {
        BtaFactor::layout(self)
    }

    fn logdet(&self) -> f64 {
        bta_logdet(self)
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        bta_solve(self, b)
    }

    fn solve_upper(&self, z: &[f64]) -> Result<Vec<f64>> {
        bta_solve_upper(self, z)
    }

    fn selected_inverse(&self) -> SelectedInverse {
        bta_selected_inverse(self)
    }
}

impl SolverBackend for BtaBackend {
    fn name(&self) -> &'static str {
        "bta"
    }

    fn factorize(&self, q: &BtaMatrix) -> Result<Box<dyn Factorization>> {
        Ok(Box::new(bta_factorize(q)?))
    }
}

/// Full dense Cholesky of the assembled matrix. `O(n³)`; meant for small
/// problems and cross-checking.
#[derive(Debug, Default, Clone, Copy)]
pub struct DenseBackend;

pub struct DenseFactorization {
    layout: BtaLayout,
    l: Block,
}

impl Factorization for DenseFactorization {
    fn layout(&self) -> BtaLayout {
        self.layout
    }

    fn logdet(&self) -> f64 {
        dense::cholesky_logdet(&self.l)
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check(b)?;
        Ok(dense::cholesky_solve(&self.l, b))
    }

    fn solve_upper(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        Ok(dense::backward_transposed(&self.l, z))
    }

    fn selected_inverse(&self) -> SelectedInverse {
        let n = self.layout.n();
        let mut inv = Block::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = dense::cholesky_solve(&self.l, &e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        SelectedInverse::from_dense_inverse(self.layout, &inv)
    }
}

impl DenseFactorization {
    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.layout.n() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.n(),
                found: v.len(),
            });
        }
        Ok(())
    }
}

impl SolverBackend for DenseBackend {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn factorize(&self, q: &BtaMatrix) -> Result<Box<dyn Factorization>> {
        let l = dense::cholesky(&q.to_dense())?;
        Ok(Box::new(DenseFactorization { layout: q.layout(), l }))
    }
}

pub struct BackendRegistry {
    backends: BTreeMap<String, Arc<dyn SolverBackend>>,
}

impl BackendRegistry {
    pub fn new() -> Self {
        BackendRegistry {
            backends: BTreeMap::new(),
        }
    }

    /// Registry holding `bta` and `dense`.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(BtaBackend));
        r.register(Arc::new(DenseBackend));
        r
    }

    pub fn register(&mut self, backend: Arc<dyn SolverBackend>) {
        self.backends.insert(backend.name().to_string(), backend);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SolverBackend>> {
        self.backends
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownBackend(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.backends.keys().map(String::as_str).collect()
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
