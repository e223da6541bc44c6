//! Block tridiagonal arrowhead (BTA) matrices.
//!
//! A BTA matrix of layout `(n_s, n_t, n_b)` has `n_t` dense diagonal blocks of
//! size `n_s`, `n_t - 1` subdiagonal blocks coupling neighbouring time steps,
//! a dense arrowhead row of `n_t` blocks of shape `n_b × n_s`, and a dense
//! `n_b × n_b` tip. Only the lower half is stored.

mod factor;
pub mod io;
mod selinv;

pub use factor::{bta_factorize, bta_logdet, bta_solve, bta_solve_lower, bta_solve_upper, BtaFactor};
pub use selinv::{bta_selected_inverse, SelectedInverse};

use crate::error::{Error, Result};
use crate::kernels::Block;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BtaLayout {
    n_s: usize,
    n_t: usize,
    n_b: usize,
}

impl BtaLayout {
    pub fn new(n_s: usize, n_t: usize, n_b: usize) -> Result<Self> {
        if n_s == 0 {
            return Err(Error::InvalidLayout("n_s must be at least 1".into()));
        }
        if n_t == 0 {
            return Err(Error::InvalidLayout("n_t must be at least 1".into()));
        }
        Ok(BtaLayout { n_s, n_t, n_b })
    }

    #[inline]
    pub fn n_s(&self) -> usize {
        self.n_s
    }

    #[inline]
    pub fn n_t(&self) -> usize {
        self.n_t
    }

    #[inline]
    pub fn n_b(&self) -> usize {
        self.n_b
    }

    /// Number of spatio-temporal unknowns, `n_s · n_t`.
    #[inline]
    pub fn n_st(&self) -> usize {
        self.n_s * self.n_t
    }

    /// Total dimension `n_s · n_t + n_b`.
    #[inline]
    pub fn n(&self) -> usize {
        self.n_st() + self.n_b
    }

    /// Row range of time block `i` in the assembled matrix.
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        i * self.n_s..(i + 1) * self.n_s
    }

    pub fn tip_range(&self) -> std::ops::Range<usize> {
        self.n_st()..self.n()
    }
}

/// Symmetric BTA matrix, lower blocks only.
///
/// `sub[i]` sits at block position `(i + 1, i)`; `arrow[i]` at `(n_t, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BtaMatrix {
    layout: BtaLayout,
    diag: Vec<Block>,
    sub: Vec<Block>,
    arrow: Vec<Block>,
    tip: Block,
}

impl BtaMatrix {
    pub fn zeros(layout: BtaLayout) -> Self {
        let (s, t, b) = (layout.n_s, layout.n_t, layout.n_b);
        BtaMatrix {
            layout,
            diag: vec![Block::zeros(s, s); t],
            sub: vec![Block::zeros(s, s); t - 1],
            arrow: vec![Block::zeros(b, s); t],
            tip: Block::zeros(b, b),
        }
    }

    pub fn new(
        layout: BtaLayout,
        diag: Vec<Block>,
        sub: Vec<Block>,
        arrow: Vec<Block>,
        tip: Block,
    ) -> Result<Self> {
        let (s, t, b) = (layout.n_s, layout.n_t, layout.n_b);
        let shape_err = |what: &str| Error::InvalidLayout(format!("{what} has inconsistent shape"));
        if diag.len() != t || diag.iter().any(|d| d.shape() != (s, s)) {
            return Err(shape_err("diagonal block list"));
        }
        if sub.len() != t - 1 || sub.iter().any(|e| e.shape() != (s, s)) {
            return Err(shape_err("subdiagonal block list"));
        }
        if arrow.len() != t || arrow.iter().any(|f| f.shape() != (b, s)) {
            return Err(shape_err("arrowhead block list"));
        }
        if tip.shape() != (b, b) {
            return Err(shape_err("tip block"));
        }
        let m = BtaMatrix {
            layout,
            diag,
            sub,
            arrow,
            tip,
        };
        if !m.is_finite() {
            return Err(Error::InvalidLayout("non-finite entry in BTA matrix".into()));
        }
        Ok(m)
    }

    pub fn layout(&self) -> BtaLayout {
        self.layout
    }

    pub fn diag(&self, i: usize) -> &Block {
        &self.diag[i]
    }

    pub fn diag_mut(&mut self, i: usize) -> &mut Block {
        &mut self.diag[i]
    }

    pub fn sub(&self, i: usize) -> &Block {
        &self.sub[i]
    }

    pub fn sub_mut(&mut self, i: usize) -> &mut Block {
        &mut self.sub[i]
    }

    pub fn arrow(&self, i: usize) -> &Block {
        &self.arrow[i]
    }

    pub fn arrow_mut(&mut self, i: usize) -> &mut Block {
        &mut self.arrow[i]
    }

    pub fn tip(&self) -> &Block {
        &self.tip
    }

    pub fn tip_mut(&mut self) -> &mut Block {
        &mut self.tip
    }

    pub fn is_finite(&self) -> bool {
        self.diag.iter().all(Block::is_finite)
            && self.sub.iter().all(Block::is_finite)
            && self.arrow.iter().all(Block::is_finite)
            && self.tip.is_finite()
    }

    /// Entry `(r, c)` of the full symmetric matrix; zero outside the pattern.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        let s = self.layout.n_s;
        let n_st = self.layout.n_st();
        if c >= n_st {
            return self.tip[(r - n_st, c - n_st)];
        }
        let (bc, lc) = (c / s, c % s);
        if r >= n_st {
            return self.arrow[bc][(r - n_st, lc)];
        }
        let (br, lr) = (r / s, r % s);
        if br == bc {
            self.diag[br][(lr, lc)]
        } else if br == bc + 1 {
            self.sub[bc][(lr, lc)]
        } else {
            0.0
        }
    }

    /// Full symmetric dense matrix, mirrored from the stored lower half.
    pub fn to_dense(&self) -> Block {
        let n = self.layout.n();
        Block::from_fn(n, n, |r, c| self.get(r, c))
    }

    /// `Q · x` using only the stored blocks.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let lay = self.layout;
        if x.len() != lay.n() {
            return Err(Error::DimensionMismatch {
                expected: lay.n(),
                found: x.len(),
            });
        }
        let s = lay.n_s;
        let n_st = lay.n_st();
        let mut y = vec![0.0; lay.n()];
        let tip_x = &x[n_st..];
        for i in 0..lay.n_t {
            let xi = &x[lay.block_range(i)];
            let d = &self.diag[i];
            for r in 0..s {
                let mut acc = 0.0;
                for c in 0..s {
                    let v = if r >= c { d[(r, c)] } else { d[(c, r)] };
                    acc += v * xi[c];
                }
                y[i * s + r] += acc;
            }
            if i + 1 < lay.n_t {
                let e = &self.sub[i];
                let xn = &x[lay.block_range(i + 1)];
                for r in 0..s {
                    let row = e.row(r);
                    y[(i + 1) * s + r] += row.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
                    for c in 0..s {
                        y[i * s + c] += row[c] * xn[r];
                    }
                }
            }
            let f = &self.arrow[i];
            for p in 0..lay.n_b {
                let row = f.row(p);
                y[n_st + p] += row.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
                for c in 0..s {
                    y[i * s + c] += row[c] * tip_x[p];
                }
            }
        }
        for r in 0..lay.n_b {
            let mut acc = 0.0;
            for c in 0..lay.n_b {
                let v = if r >= c { self.tip[(r, c)] } else { self.tip[(c, r)] };
                acc += v * tip_x[c];
            }
            y[n_st + r] += acc;
        }
        Ok(y)
    }
}
