//! Dense block kernels used by the structured factorization.
//!
//! Blocks are small row-major matrices. Every kernel accumulates in a fixed
//! order (ascending inner index, rows processed top to bottom) so repeated
//! calls on equal inputs give bitwise-equal results.

use std::fmt;
use std::ops::{Index, IndexMut};

#[derive(Clone, PartialEq)]
pub struct Block {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Block {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Block {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Block {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut b = Self::zeros(n, n);
        for i in 0..n {
            b[(i, i)] = 1.0;
        }
        b
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut b = Self::zeros(n, n);
        for i in 0..n {
            b[(i, i)] = s;
        }
        b
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Block { rows, cols, data }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Block { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Block { rows: r, cols: c, data }
    }

    pub fn column(values: &[f64]) -> Self {
        Block {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Block {
        let mut t = Block::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, other: &Block, alpha: f64) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Replaces the block by `(A + Aᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }
}

impl Index<(usize, usize)> for Block {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Block {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transpose {
    No,
    Yes,
}

/// Non-positive (or non-finite) pivot encountered at `column`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PivotError {
    pub column: usize,
}

/// Lower Cholesky factor of a symmetric block. Only the lower triangle of
/// `a` is read.
pub fn dense_chol(a: &Block) -> Result<Block, PivotError> {
    assert_eq!(a.rows, a.cols, "cholesky of a non-square block");
    let n = a.rows;
    let mut l = Block::zeros(n, n);
    for j in 0..n {
        let (head, tail) = l.data.split_at_mut(j * n + n);
        let row_j = &head[j * n..j * n + j];
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= row_j[k] * row_j[k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(PivotError { column: j });
        }
        let pivot = d.sqrt();
        head[j * n + j] = pivot;
        let row_j = &head[j * n..j * n + j];
        for i in (j + 1)..n {
            let row_i = &mut tail[(i - j - 1) * n..(i - j) * n];
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= row_i[k] * row_j[k];
            }
            row_i[j] = s / pivot;
        }
    }
    Ok(l)
}

/// Triangular solve with a lower-triangular block `l`, overwriting `b`.
///
/// * `Left,  No`  : `L  X = B`
/// * `Left,  Yes` : `Lᵀ X = B`
/// * `Right, No`  : `X L  = B`
/// * `Right, Yes` : `X Lᵀ = B`
pub fn dense_tri_solve(l: &Block, b: &mut Block, side: Side, trans: Transpose) {
    assert_eq!(l.rows, l.cols);
    match side {
        Side::Left => {
            assert_eq!(l.rows, b.rows, "triangular solve dimension mismatch");
            match trans {
                Transpose::No => forward_rows(l, b),
                Transpose::Yes => backward_rows(l, b),
            }
        }
        Side::Right => {
            assert_eq!(l.rows, b.cols, "triangular solve dimension mismatch");
            // X op(L) = B  <=>  op(L)ᵀ Xᵀ = Bᵀ
            let mut bt = b.transpose();
            match trans {
                Transpose::No => backward_rows(l, &mut bt),
                Transpose::Yes => forward_rows(l, &mut bt),
            }
            *b = bt.transpose();
        }
    }
}

fn forward_rows(l: &Block, b: &mut Block) {
    let n = l.rows;
    let m = b.cols;
    if m == 0 {
        return;
    }
    for j in 0..n {
        let (done, rest) = b.data.split_at_mut(j * m);
        let target = &mut rest[..m];
        for k in 0..j {
            let coef = l[(j, k)];
            if coef != 0.0 {
                let src = &done[k * m..(k + 1) * m];
                for (t, s) in target.iter_mut().zip(src) {
                    *t -= coef * s;
                }
            }
        }
        let inv = 1.0 / l[(j, j)];
        target.iter_mut().for_each(|t| *t *= inv);
    }
}

fn backward_rows(l: &Block, b: &mut Block) {
    let n = l.rows;
    let m = b.cols;
    if m == 0 {
        return;
    }
    for j in (0..n).rev() {
        let (head, done) = b.data.split_at_mut((j + 1) * m);
        let target = &mut head[j * m..];
        for k in (j + 1)..n {
            let coef = l[(k, j)];
            if coef != 0.0 {
                let src = &done[(k - j - 1) * m..(k - j) * m];
                for (t, s) in target.iter_mut().zip(src) {
                    *t -= coef * s;
                }
            }
        }
        let inv = 1.0 / l[(j, j)];
        target.iter_mut().for_each(|t| *t *= inv);
    }
}

/// `C += alpha · op(A) · op(B)`.
pub fn block_multiply_accumulate(
    c: &mut Block,
    a: &Block,
    ta: Transpose,
    b: &Block,
    tb: Transpose,
    alpha: f64,
) {
    let (m, ka) = match ta {
        Transpose::No => (a.rows, a.cols),
        Transpose::Yes => (a.cols, a.rows),
    };
    let (kb, n) = match tb {
        Transpose::No => (b.rows, b.cols),
        Transpose::Yes => (b.cols, b.rows),
    };
    assert_eq!(ka, kb, "inner dimensions differ");
    assert_eq!((c.rows, c.cols), (m, n), "output block has wrong shape");
    if m == 0 || n == 0 || ka == 0 {
        return;
    }
    // op(B) is materialized row-major so the inner loop is a contiguous axpy.
    let bt;
    let b_eff = match tb {
        Transpose::No => b,
        Transpose::Yes => {
            bt = b.transpose();
            &bt
        }
    };
    match ta {
        Transpose::No => {
            for i in 0..m {
                let c_row = &mut c.data[i * n..(i + 1) * n];
                let a_row = &a.data[i * ka..(i + 1) * ka];
                for (k, &aik) in a_row.iter().enumerate() {
                    if aik == 0.0 {
                        continue;
                    }
                    let coef = alpha * aik;
                    let b_row = &b_eff.data[k * n..(k + 1) * n];
                    for (cv, bv) in c_row.iter_mut().zip(b_row) {
                        *cv += coef * bv;
                    }
                }
            }
        }
        Transpose::Yes => {
            for i in 0..m {
                let c_row = &mut c.data[i * n..(i + 1) * n];
                for k in 0..ka {
                    let aki = a.data[k * a.cols + i];
                    if aki == 0.0 {
                        continue;
                    }
                    let coef = alpha * aki;
                    let b_row = &b_eff.data[k * n..(k + 1) * n];
                    for (cv, bv) in c_row.iter_mut().zip(b_row) {
                        *cv += coef * bv;
                    }
                }
            }
        }
    }
}

/// `op(A) · op(B)` into a fresh block.
pub fn block_multiply(a: &Block, ta: Transpose, b: &Block, tb: Transpose) -> Block {
    let m = if ta == Transpose::No { a.rows } else { a.cols };
    let n = if tb == Transpose::No { b.cols } else { b.rows };
    let mut c = Block::zeros(m, n);
    block_multiply_accumulate(&mut c, a, ta, b, tb, 1.0);
    c
}

/// `L⁻¹` for lower-triangular `l`.
pub fn lower_inverse(l: &Block) -> Block {
    let mut x = Block::identity(l.rows);
    dense_tri_solve(l, &mut x, Side::Left, Transpose::No);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Block {
        Block::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn naive_product(a: &Block, ta: Transpose, b: &Block, tb: Transpose) -> Block {
        let get_a = |i: usize, k: usize| if ta == Transpose::No { a[(i, k)] } else { a[(k, i)] };
        let get_b = |k: usize, j: usize| if tb == Transpose::No { b[(k, j)] } else { b[(j, k)] };
        let m = if ta == Transpose::No { a.rows() } else { a.cols() };
        let kk = if ta == Transpose::No { a.cols() } else { a.rows() };
        let n = if tb == Transpose::No { b.cols() } else { b.rows() };
        Block::from_fn(m, n, |i, j| (0..kk).map(|k| get_a(i, k) * get_b(k, j)).sum())
    }

    #[test]
    fn chol_of_identity_is_identity() {
        let l = dense_chol(&Block::identity(5)).unwrap();
        assert_eq!(l, Block::identity(5));
    }

    #[test]
    fn chol_reports_failing_pivot() {
        let a = Block::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert_eq!(dense_chol(&a), Err(PivotError { column: 1 }));
        let z = Block::zeros(3, 3);
        assert_eq!(dense_chol(&z), Err(PivotError { column: 0 }));
    }

    #[test]
    fn chol_ignores_upper_triangle() {
        let a = Block::from_rows(&[&[4.0, 99.0], &[2.0, 5.0]]);
        let l = dense_chol(&a).unwrap();
        assert_eq!(l[(0, 0)], 2.0);
        assert_eq!(l[(1, 0)], 1.0);
        assert_eq!(l[(1, 1)], 2.0);
        assert_eq!(l[(0, 1)], 0.0);
    }

    #[test]
    fn tri_solve_with_twice_identity_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_block(&mut rng, 4, 3);
        let two = Block::scaled_identity(4, 2.0);
        for trans in [Transpose::No, Transpose::Yes] {
            let mut x = b.clone();
            dense_tri_solve(&two, &mut x, Side::Left, trans);
            let mut expect = b.clone();
            expect.scale(0.5);
            assert_eq!(x, expect);
        }
        let bt = b.transpose();
        let mut x = bt.clone();
        dense_tri_solve(&two, &mut x, Side::Right, Transpose::Yes);
        let mut expect = bt;
        expect.scale(0.5);
        assert_eq!(x, expect);
    }

    #[test]
    fn tri_solve_all_variants_invert_their_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 7;
        let mut l = random_block(&mut rng, n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                l[(i, j)] = 0.0;
            }
            l[(i, i)] = 2.0 + l[(i, i)].abs();
        }
        let x_true = random_block(&mut rng, n, 3);
        for trans in [Transpose::No, Transpose::Yes] {
            let mut b = naive_product(&l, trans, &x_true, Transpose::No);
            dense_tri_solve(&l, &mut b, Side::Left, trans);
            let mut d = b.clone();
            d.add_scaled(&x_true, -1.0);
            assert!(d.frobenius_norm() < 1e-12);
        }
        let x_true = random_block(&mut rng, 3, n);
        for trans in [Transpose::No, Transpose::Yes] {
            let mut b = naive_product(&x_true, Transpose::No, &l, trans);
            dense_tri_solve(&l, &mut b, Side::Right, trans);
            let mut d = b.clone();
            d.add_scaled(&x_true, -1.0);
            assert!(d.frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn multiply_accumulate_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for ta in [Transpose::No, Transpose::Yes] {
            for tb in [Transpose::No, Transpose::Yes] {
                let a = random_block(&mut rng, 8, 8);
                let b = random_block(&mut rng, 8, 8);
                let c0 = random_block(&mut rng, 8, 8);
                let mut c = c0.clone();
                block_multiply_accumulate(&mut c, &a, ta, &b, tb, -1.0);
                let mut expect = naive_product(&a, ta, &b, tb);
                expect.scale(-1.0);
                expect.add_scaled(&c0, 1.0);
                for (x, y) in c.as_slice().iter().zip(expect.as_slice()) {
                    assert!((x - y).abs() <= 1e-14, "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn multiply_handles_empty_dimensions() {
        let a = Block::zeros(0, 4);
        let b = Block::zeros(4, 3);
        let c = block_multiply(&a, Transpose::No, &b, Transpose::No);
        assert_eq!(c.shape(), (0, 3));
        let a = Block::zeros(3, 0);
        let b = Block::zeros(0, 3);
        let c = block_multiply(&a, Transpose::No, &b, Transpose::No);
        assert_eq!(c, Block::zeros(3, 3));
    }

    #[test]
    fn kernels_are_bitwise_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_block(&mut rng, 16, 16);
        let b = random_block(&mut rng, 16, 16);
        let c1 = block_multiply(&a, Transpose::No, &b, Transpose::Yes);
        let c2 = block_multiply(&a, Transpose::No, &b, Transpose::Yes);
        assert_eq!(c1.as_slice(), c2.as_slice());
    }
}
