//! Spatio-temporal latent Gaussian model: hyperparameters, operators, data,
//! and assembly of the prior and conditional precision matrices.
//!
//! The spatio-temporal prior precision is
//!
//! ```text
//! Q_st(θ) = γ_u · ( γ_t · (J ⊗ C) + I_{n_t} ⊗ (γ_s² C + G) )
//! ```
//!
//! with `C` a diagonal mass matrix, `G` a spatial stiffness (graph Laplacian)
//! and `J` a first-order random-walk precision in time. Fixed effects get an
//! independent Gaussian prior with a shared precision.

use crate::bta::{BtaLayout, BtaMatrix};
use crate::dense;
use crate::error::{Error, Result};
use crate::kernels::Block;

/// Log-scale hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParameters {
    pub log_tau_y: f64,
    pub log_gamma_s: f64,
    pub log_gamma_t: f64,
    pub log_gamma_u: f64,
}

impl HyperParameters {
    pub const DIM: usize = 4;
    pub const NAMES: [&'static str; 4] = ["log_tau_y", "log_gamma_s", "log_gamma_t", "log_gamma_u"];

    pub fn new(log_tau_y: f64, log_gamma_s: f64, log_gamma_t: f64, log_gamma_u: f64) -> Self {
        HyperParameters {
            log_tau_y,
            log_gamma_s,
            log_gamma_t,
            log_gamma_u,
        }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match *v {
            [a, b, c, d] => Ok(Self::new(a, b, c, d)),
            _ => Err(Error::DimensionMismatch {
                expected: Self::DIM,
                found: v.len(),
            }),
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.log_tau_y, self.log_gamma_s, self.log_gamma_t, self.log_gamma_u]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn tau_y(&self) -> f64 {
        self.log_tau_y.exp()
    }

    pub fn gamma_s(&self) -> f64 {
        self.log_gamma_s.exp()
    }

    pub fn gamma_t(&self) -> f64 {
        self.log_gamma_t.exp()
    }

    pub fn gamma_u(&self) -> f64 {
        self.log_gamma_u.exp()
    }
}

/// Sparse matrix in coordinate form. Duplicate entries are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplets {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(r, c, v) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::InvalidModel(format!(
                    "triplet ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("non-finite value at ({r}, {c})")));
            }
        }
        Ok(Triplets { rows, cols, entries })
    }

    pub fn to_dense(&self) -> Block {
        let mut m = Block::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    /// Path-graph Laplacian on `n` nodes.
    pub fn path_laplacian(n: usize) -> Self {
        let mut diag = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            diag[i] += 1.0;
            diag[i + 1] += 1.0;
        }
        Tridiagonal {
            diag,
            off: vec![-1.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> Block {
        let n = self.len();
        Block::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i == j + 1 {
                self.off[j]
            } else if j == i + 1 {
                self.off[i]
            } else {
                0.0
            }
        })
    }
}

/// Operators defining the latent prior.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    layout: BtaLayout,
    mass: Vec<f64>,
    stiffness: Triplets,
    stiffness_dense: Block,
    temporal: Tridiagonal,
    prior_precision_fixed: f64,
}

/// Temporal, spatial and noise smoothness orders of the underlying SPDE.
pub const SMOOTHNESS_ORDERS: (u32, u32, u32) = (1, 2, 1);

fn check_laplacian_like(m: &Block, what: &str) -> Result<()> {
    let n = m.rows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidModel(format!("{what} is not symmetric at ({i}, {j})")));
            }
        }
        let row_sum: f64 = m.row(i).iter().sum();
        if row_sum.abs() > 1e-10 * scale {
            return Err(Error::InvalidModel(format!("{what} row {i} does not sum to zero")));
        }
    }
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] += 1e-10 * scale;
    }
    dense::cholesky(&shifted).map_err(|_| Error::InvalidModel(format!("{what} is not positive semidefinite")))?;
    Ok(())
}

impl ModelSpec {
    pub fn new(
        layout: BtaLayout,
        mass: Vec<f64>,
        stiffness: Triplets,
        temporal: Tridiagonal,
        prior_precision_fixed: f64,
    ) -> Result<Self> {
        let n_s = layout.n_s();
        if mass.len() != n_s || stiffness.rows != n_s || stiffness.cols != n_s {
            return Err(Error::InvalidModel(format!("spatial operators must be {n_s}x{n_s}")));
        }
        if temporal.len() != layout.n_t() || temporal.off.len() + 1 != layout.n_t() {
            return Err(Error::InvalidModel(format!(
                "temporal operator must have {} nodes",
                layout.n_t()
            )));
        }
        if let Some(k) = mass.iter().position(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidModel(format!("mass entry {k} is not strictly positive")));
        }
        if !(prior_precision_fixed > 0.0) || !prior_precision_fixed.is_finite() {
            return Err(Error::InvalidModel("fixed-effect prior precision must be positive".into()));
        }
        let stiffness_dense = stiffness.to_dense();
        check_laplacian_like(&stiffness_dense, "stiffness matrix G")?;
        check_laplacian_like(&temporal.to_dense(), "temporal operator J")?;
        Ok(ModelSpec {
            layout,
            mass,
            stiffness,
            stiffness_dense,
            temporal,
            prior_precision_fixed,
        })
    }

    pub fn layout(&self) -> BtaLayout {
        self.layout
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness(&self) -> &Triplets {
        &self.stiffness
    }

    pub fn temporal(&self) -> &Tridiagonal {
        &self.temporal
    }

    pub fn prior_precision_fixed(&self) -> f64 {
        self.prior_precision_fixed
    }

    /// Same operators, different layout tip size / fixed-effect precision.
    pub fn with_fixed_effects(&self, n_b: usize, prior_precision_fixed: f64) -> Result<Self> {
        let layout = BtaLayout::new(self.layout.n_s(), self.layout.n_t(), n_b)?;
        ModelSpec::new(
            layout,
            self.mass.clone(),
            self.stiffness.clone(),
            self.temporal.clone(),
            prior_precision_fixed,
        )
    }
}

/// `rows × cols` four-neighbour lattice with unit mass and a path-graph
/// temporal operator. Node `(r, c)` has index `r · cols + c`.
pub fn build_lattice_spec(
    rows: usize,
    cols: usize,
    n_t: usize,
    n_b: usize,
    prior_precision_fixed: f64,
) -> Result<ModelSpec> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidModel("lattice needs at least one row and column".into()));
    }
    let n_s = rows * cols;
    let layout = BtaLayout::new(n_s, n_t, n_b)?;
    let mut degree = vec![0.0; n_s];
    let mut entries = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            let mut link = |other: usize| {
                entries.push((k, other, -1.0));
                entries.push((other, k, -1.0));
                degree[k] += 1.0;
                degree[other] += 1.0;
            };
            if c + 1 < cols {
                link(k + 1);
            }
            if r + 1 < rows {
                link(k + cols);
            }
        }
    }
    entries.extend(degree.iter().enumerate().map(|(k, &d)| (k, k, d)));
    let g = Triplets::new(n_s, n_s, entries)?;
    ModelSpec::new(
        layout,
        vec![1.0; n_s],
        g,
        Tridiagonal::path_laplacian(n_t),
        prior_precision_fixed,
    )
}

/// Prior precision `Q_x(θ)`.
pub fn assemble_prior_precision(spec: &ModelSpec, theta: &HyperParameters) -> BtaMatrix {
    let lay = spec.layout;
    let n_s = lay.n_s();
    let (gs, gt, gu) = (theta.gamma_s(), theta.gamma_t(), theta.gamma_u());
    let gs2 = gs * gs;

    let mut k = spec.stiffness_dense.clone();
    for (i, c) in spec.mass.iter().enumerate() {
        k[(i, i)] += gs2 * c;
    }
    k.scale(gu);

    let mut q = BtaMatrix::zeros(lay);
    for t in 0..lay.n_t() {
        let d = q.diag_mut(t);
        *d = k.clone();
        let jt = gu * gt * spec.temporal.diag[t];
        for (i, c) in spec.mass.iter().enumerate() {
            d[(i, i)] += jt * c;
        }
        if t + 1 < lay.n_t() {
            let jo = gu * gt * spec.temporal.off[t];
            let e = q.sub_mut(t);
            for (i, c) in spec.mass.iter().enumerate() {
                e[(i, i)] = jo * c;
            }
        }
    }
    *q.tip_mut() = Block::scaled_identity(lay.n_b(), spec.prior_precision_fixed);
    debug_assert_eq!(q.diag(0).rows(), n_s);
    q
}

/// One observation row of `Ã = [A, Z]`, with the `A` part localized to a
/// single time block.
#[derive(Debug, Clone, PartialEq)]
struct ObsRow {
    block: Option<usize>,
    entries: Vec<(usize, f64)>,
}

/// Observations and their projection onto the latent field.
#[derive(Debug, Clone)]
pub struct Dataset {
    layout: BtaLayout,
    y: Vec<f64>,
    a: Triplets,
    z: Block,
    rows: Vec<ObsRow>,
    gram: BtaMatrix,
    at_y: Vec<f64>,
}

impl Dataset {
    /// Validates dimensions and the single-time-block rule, and precomputes
    /// the θ-independent products `ÃᵀÃ` and `Ãᵀy`.
    pub fn new(layout: BtaLayout, y: Vec<f64>, a: Triplets, z: Block) -> Result<Self> {
        let n_o = y.len();
        if a.rows != n_o {
            return Err(Error::DimensionMismatch { expected: n_o, found: a.rows });
        }
        if a.cols != layout.n_st() {
            return Err(Error::DimensionMismatch {
                expected: layout.n_st(),
                found: a.cols,
            });
        }
        if z.rows() != n_o || z.cols() != layout.n_b() {
            return Err(Error::InvalidModel(format!(
                "covariate matrix must be {n_o}x{}, found {}x{}",
                layout.n_b(),
                z.rows(),
                z.cols()
            )));
        }
        if !y.iter().all(|v| v.is_finite()) || !z.is_finite() {
            return Err(Error::InvalidModel("non-finite observation or covariate".into()));
        }
        let n_s = layout.n_s();
        let mut rows = vec![
            ObsRow {
                block: None,
                entries: Vec::new()
            };
            n_o
        ];
        for &(r, c, v) in &a.entries {
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("non-finite projection weight in row {r}")));
            }
            let row = &mut rows[r];
            let blk = c / n_s;
            match row.block {
                None => row.block = Some(blk),
                Some(b) if b != blk => return Err(Error::BandwidthViolation { row: r }),
                Some(_) => {}
            }
            match row.entries.iter_mut().find(|(col, _)| *col == c % n_s) {
                Some(e) => e.1 += v,
                None => row.entries.push((c % n_s, v)),
            }
        }

        let mut data = Dataset {
            layout,
            y,
            a,
            z,
            rows,
            gram: BtaMatrix::zeros(layout),
            at_y: vec![0.0; layout.n()],
        };
        data.gram = data.scatter_gram(1.0)?;
        data.at_y = data.transpose_project(&data.y);
        Ok(data)
    }

    pub fn layout(&self) -> BtaLayout {
        self.layout
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn a(&self) -> &Triplets {
        &self.a
    }

    pub fn z(&self) -> &Block {
        &self.z
    }

    /// `scale · ÃᵀÃ` as a BTA matrix (subdiagonal blocks stay zero).
    fn scatter_gram(&self, scale: f64) -> Result<BtaMatrix> {
        let lay = self.layout;
        let n_b = lay.n_b();
        let mut g = BtaMatrix::zeros(lay);
        for (k, row) in self.rows.iter().enumerate() {
            let zk = self.z.row(k);
            if let Some(t) = row.block {
                if t >= lay.n_t() {
                    return Err(Error::BandwidthViolation { row: k });
                }
                let d = g.diag_mut(t);
                for &(ia, va) in &row.entries {
                    for &(ib, vb) in &row.entries {
                        d[(ia, ib)] += scale * va * vb;
                    }
                }
                let f = g.arrow_mut(t);
                for p in 0..n_b {
                    for &(ia, va) in &row.entries {
                        f[(p, ia)] += scale * zk[p] * va;
                    }
                }
            }
            let tip = g.tip_mut();
            for p in 0..n_b {
                for q in 0..n_b {
                    tip[(p, q)] += scale * zk[p] * zk[q];
                }
            }
        }
        Ok(g)
    }

    /// `Ã x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let lay = self.layout;
        if x.len() != lay.n() {
            return Err(Error::DimensionMismatch {
                expected: lay.n(),
                found: x.len(),
            });
        }
        let beta = &x[lay.n_st()..];
        Ok(self
            .rows
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let mut v: f64 = self.z.row(k).iter().zip(beta).map(|(a, b)| a * b).sum();
                if let Some(t) = row.block {
                    let off = t * lay.n_s();
                    v += row.entries.iter().map(|&(i, w)| w * x[off + i]).sum::<f64>();
                }
                v
            })
            .collect())
    }

    /// `Ãᵀ r`.
    pub fn transpose_project(&self, r: &[f64]) -> Vec<f64> {
        let lay = self.layout;
        let n_st = lay.n_st();
        let mut out = vec![0.0; lay.n()];
        for (k, row) in self.rows.iter().enumerate() {
            if let Some(t) = row.block {
                let off = t * lay.n_s();
                for &(i, w) in &row.entries {
                    out[off + i] += w * r[k];
                }
            }
            for (p, zp) in self.z.row(k).iter().enumerate() {
                out[n_st + p] += zp * r[k];
            }
        }
        out
    }
}

/// Conditional precision `Q_{x|y}(θ) = Q_x(θ) + τ_y ÃᵀÃ`.
pub fn assemble_conditional_precision(
    q_x: &BtaMatrix,
    data: &Dataset,
    theta: &HyperParameters,
) -> Result<BtaMatrix> {
    let lay = q_x.layout();
    if lay != data.layout {
        return Err(Error::InvalidModel("dataset layout does not match the prior precision".into()));
    }
    let tau = theta.tau_y();
    let mut q = q_x.clone();
    for t in 0..lay.n_t() {
        q.diag_mut(t).add_scaled(data.gram.diag(t), tau);
        q.arrow_mut(t).add_scaled(data.gram.arrow(t), tau);
    }
    q.tip_mut().add_scaled(data.gram.tip(), tau);
    Ok(q)
}

/// `τ_y Ãᵀ y`, the right-hand side of the conditional-mean system.
pub fn conditional_mean_rhs(data: &Dataset, theta: &HyperParameters) -> Vec<f64> {
    let tau = theta.tau_y();
    data.at_y.iter().map(|v| tau * v).collect()
}
