use crate::error::{Error, Result};
use crate::kernels::{block_multiply_accumulate, dense_chol, dense_tri_solve, Block, Side, Transpose};

use super::{BtaLayout, BtaMatrix};

/// Lower block Cholesky factor of a [`BtaMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct BtaFactor {
    pub(crate) layout: BtaLayout,
    pub(crate) l_diag: Vec<Block>,
    pub(crate) l_sub: Vec<Block>,
    pub(crate) l_arrow: Vec<Block>,
    pub(crate) l_tip: Block,
}

impl BtaFactor {
    pub fn layout(&self) -> BtaLayout {
        self.layout
    }

    pub fn l_diag(&self, i: usize) -> &Block {
        &self.l_diag[i]
    }

    pub fn l_sub(&self, i: usize) -> &Block {
        &self.l_sub[i]
    }

    pub fn l_arrow(&self, i: usize) -> &Block {
        &self.l_arrow[i]
    }

    pub fn l_tip(&self) -> &Block {
        &self.l_tip
    }

    /// Dense lower-triangular `L`.
    pub fn to_dense(&self) -> Block {
        let lay = self.layout;
        let n = lay.n();
        let s = lay.n_s();
        let n_st = lay.n_st();
        let mut l = Block::zeros(n, n);
        for i in 0..lay.n_t() {
            let o = i * s;
            for r in 0..s {
                for c in 0..=r {
                    l[(o + r, o + c)] = self.l_diag[i][(r, c)];
                }
                if i + 1 < lay.n_t() {
                    for c in 0..s {
                        l[(o + s + r, o + c)] = self.l_sub[i][(r, c)];
                    }
                }
            }
            for p in 0..lay.n_b() {
                for c in 0..s {
                    l[(n_st + p, o + c)] = self.l_arrow[i][(p, c)];
                }
            }
        }
        for r in 0..lay.n_b() {
            for c in 0..=r {
                l[(n_st + r, n_st + c)] = self.l_tip[(r, c)];
            }
        }
        l
    }
}

/// Block Cholesky of an SPD BTA matrix.
///
/// The diagonal, arrowhead and tip blocks are updated on working copies, so
/// `q` is left untouched. A failed dense Cholesky is reported with the index
/// of the offending diagonal block (`n_t` for the tip).
pub fn bta_factorize(q: &BtaMatrix) -> Result<BtaFactor> {
    let lay = q.layout();
    let n_t = lay.n_t();

    let mut l_diag = Vec::with_capacity(n_t);
    let mut l_sub = Vec::with_capacity(n_t.saturating_sub(1));
    let mut l_arrow = Vec::with_capacity(n_t);

    let mut d_work = q.diag(0).clone();
    let mut f_work = q.arrow(0).clone();
    let mut tip_work = q.tip().clone();

    for i in 0..n_t {
        let l_d = dense_chol(&d_work).map_err(|_| Error::NotPositiveDefinite { block_index: i })?;

        let mut l_f = std::mem::replace(&mut f_work, Block::zeros(0, 0));
        dense_tri_solve(&l_d, &mut l_f, Side::Right, Transpose::Yes);
        block_multiply_accumulate(&mut tip_work, &l_f, Transpose::No, &l_f, Transpose::Yes, -1.0);

        if i + 1 < n_t {
            let mut l_e = q.sub(i).clone();
            dense_tri_solve(&l_d, &mut l_e, Side::Right, Transpose::Yes);

            d_work = q.diag(i + 1).clone();
            block_multiply_accumulate(&mut d_work, &l_e, Transpose::No, &l_e, Transpose::Yes, -1.0);

            f_work = q.arrow(i + 1).clone();
            block_multiply_accumulate(&mut f_work, &l_f, Transpose::No, &l_e, Transpose::Yes, -1.0);

            l_sub.push(l_e);
        }
        l_diag.push(l_d);
        l_arrow.push(l_f);
    }

    let l_tip = dense_chol(&tip_work).map_err(|_| Error::NotPositiveDefinite { block_index: n_t })?;

    Ok(BtaFactor {
        layout: lay,
        l_diag,
        l_sub,
        l_arrow,
        l_tip,
    })
}

/// `log det Q = 2 Σ log diag(L)`.
pub fn bta_logdet(l: &BtaFactor) -> f64 {
    let mut acc = 0.0;
    for block in l.l_diag.iter().chain(std::iter::once(&l.l_tip)) {
        for k in 0..block.rows() {
            acc += block[(k, k)].ln();
        }
    }
    2.0 * acc
}

fn check_len(l: &BtaFactor, b: &[f64]) -> Result<()> {
    let n = l.layout.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    Ok(())
}

/// Forward substitution `L z = b`.
pub fn bta_solve_lower(l: &BtaFactor, b: &[f64]) -> Result<Vec<f64>> {
    check_len(l, b)?;
    let lay = l.layout;
    let n_t = lay.n_t();
    let n_st = lay.n_st();

    let mut z: Vec<Block> = (0..n_t).map(|i| Block::column(&b[lay.block_range(i)])).collect();
    let mut z_tip = Block::column(&b[n_st..]);
    for i in 0..n_t {
        if i > 0 {
            let (prev, cur) = z.split_at_mut(i);
            block_multiply_accumulate(&mut cur[0], &l.l_sub[i - 1], Transpose::No, &prev[i - 1], Transpose::No, -1.0);
        }
        dense_tri_solve(&l.l_diag[i], &mut z[i], Side::Left, Transpose::No);
        block_multiply_accumulate(&mut z_tip, &l.l_arrow[i], Transpose::No, &z[i], Transpose::No, -1.0);
    }
    dense_tri_solve(&l.l_tip, &mut z_tip, Side::Left, Transpose::No);

    let mut out = Vec::with_capacity(lay.n());
    for zi in z {
        out.extend(zi.into_vec());
    }
    out.extend(z_tip.into_vec());
    Ok(out)
}

/// Backward substitution `Lᵀ x = z`.
pub fn bta_solve_upper(l: &BtaFactor, z: &[f64]) -> Result<Vec<f64>> {
    check_len(l, z)?;
    let lay = l.layout;
    let n_t = lay.n_t();
    let n_st = lay.n_st();

    let mut x_tip = Block::column(&z[n_st..]);
    dense_tri_solve(&l.l_tip, &mut x_tip, Side::Left, Transpose::Yes);

    let mut x: Vec<Block> = (0..n_t).map(|i| Block::column(&z[lay.block_range(i)])).collect();
    for i in (0..n_t).rev() {
        if i + 1 < n_t {
            let (cur, next) = x.split_at_mut(i + 1);
            block_multiply_accumulate(&mut cur[i], &l.l_sub[i], Transpose::Yes, &next[0], Transpose::No, -1.0);
        }
        block_multiply_accumulate(&mut x[i], &l.l_arrow[i], Transpose::Yes, &x_tip, Transpose::No, -1.0);
        dense_tri_solve(&l.l_diag[i], &mut x[i], Side::Left, Transpose::Yes);
    }

    let mut out = Vec::with_capacity(lay.n());
    for xi in x {
        out.extend(xi.into_vec());
    }
    out.extend(x_tip.into_vec());
    Ok(out)
}

/// Solves `Q x = b` given `Q = L Lᵀ`.
pub fn bta_solve(l: &BtaFactor, b: &[f64]) -> Result<Vec<f64>> {
    if !b.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidModel("right-hand side contains non-finite values".into()));
    }
    let z = bta_solve_lower(l, b)?;
    bta_solve_upper(l, &z)
}
