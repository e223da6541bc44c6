use crate::kernels::{block_multiply, block_multiply_accumulate, dense_tri_solve, lower_inverse, Block, Side, Transpose};

use super::{BtaFactor, BtaLayout};

/// Diagonal blocks, arrowhead row blocks and tip of `Q⁻¹`.
///
/// Interior off-diagonal blocks of the inverse are never formed.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedInverse {
    layout: BtaLayout,
    s_diag: Vec<Block>,
    s_arrow: Vec<Block>,
    s_tip: Block,
}

impl SelectedInverse {
    pub fn layout(&self) -> BtaLayout {
        self.layout
    }

    pub fn diag(&self, i: usize) -> &Block {
        &self.s_diag[i]
    }

    /// Block `(n_t, i)` of the inverse, shape `n_b × n_s`.
    pub fn arrow(&self, i: usize) -> &Block {
        &self.s_arrow[i]
    }

    pub fn tip(&self) -> &Block {
        &self.s_tip
    }

    /// Extracts the selected blocks from a full dense inverse.
    pub fn from_dense_inverse(layout: BtaLayout, inv: &Block) -> SelectedInverse {
        let (n_s, n_b, n_st) = (layout.n_s(), layout.n_b(), layout.n_st());
        assert_eq!(inv.shape(), (layout.n(), layout.n()));
        let s_diag = (0..layout.n_t())
            .map(|i| Block::from_fn(n_s, n_s, |r, c| inv[(i * n_s + r, i * n_s + c)]))
            .collect();
        let s_arrow = (0..layout.n_t())
            .map(|i| Block::from_fn(n_b, n_s, |r, c| inv[(n_st + r, i * n_s + c)]))
            .collect();
        let s_tip = Block::from_fn(n_b, n_b, |r, c| inv[(n_st + r, n_st + c)]);
        SelectedInverse {
            layout,
            s_diag,
            s_arrow,
            s_tip,
        }
    }

    /// Diagonal of `Q⁻¹` in natural ordering (time blocks, then tip).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout.n());
        for d in &self.s_diag {
            out.extend(d.diagonal());
        }
        out.extend(self.s_tip.diagonal());
        out
    }
}

/// `L⁻ᵀ L⁻¹` for a lower-triangular block.
fn inverse_from_lower(l: &Block) -> Block {
    let l_inv = lower_inverse(l);
    let mut s = block_multiply(&l_inv, Transpose::Yes, &l_inv, Transpose::No);
    s.symmetrize();
    s
}

/// Selected block inversion of `Q = L Lᵀ`, sweeping from the tip upward.
///
/// With `W_i = L_{E_i} L_{D_i}⁻¹` and `V_i = L_{F_i} L_{D_i}⁻¹`:
///
/// ```text
/// S_tip       = L_T⁻ᵀ L_T⁻¹
/// S_{tip,i}   = -(S_{tip,i+1} W_i + S_tip V_i)
/// S_{i+1,i}   = -(S_{i+1,i+1} W_i + S_{tip,i+1}ᵀ V_i)
/// S_ii        = L_{D_i}⁻ᵀ L_{D_i}⁻¹ - W_iᵀ S_{i+1,i} - V_iᵀ S_{tip,i}
/// ```
///
/// where the `i + 1` terms vanish for the last time block. `S_{i+1,i}` is a
/// temporary and is dropped after use.
pub fn bta_selected_inverse(l: &BtaFactor) -> SelectedInverse {
    let lay = l.layout();
    let n_t = lay.n_t();
    let (n_s, n_b) = (lay.n_s(), lay.n_b());

    let s_tip = inverse_from_lower(l.l_tip());
    let mut s_diag = vec![Block::zeros(0, 0); n_t];
    let mut s_arrow = vec![Block::zeros(0, 0); n_t];

    for i in (0..n_t).rev() {
        let l_d = l.l_diag(i);

        let mut v = l.l_arrow(i).clone();
        dense_tri_solve(l_d, &mut v, Side::Right, Transpose::No);

        let mut arrow = Block::zeros(n_b, n_s);
        block_multiply_accumulate(&mut arrow, &s_tip, Transpose::No, &v, Transpose::No, -1.0);

        let mut diag = inverse_from_lower(l_d);

        if i + 1 < n_t {
            let mut w = l.l_sub(i).clone();
            dense_tri_solve(l_d, &mut w, Side::Right, Transpose::No);

            let s_next = &s_diag[i + 1];
            let arrow_next = &s_arrow[i + 1];
            block_multiply_accumulate(&mut arrow, arrow_next, Transpose::No, &w, Transpose::No, -1.0);

            let mut coupling = Block::zeros(n_s, n_s);
            block_multiply_accumulate(&mut coupling, s_next, Transpose::No, &w, Transpose::No, -1.0);
            block_multiply_accumulate(&mut coupling, arrow_next, Transpose::Yes, &v, Transpose::No, -1.0);

            block_multiply_accumulate(&mut diag, &w, Transpose::Yes, &coupling, Transpose::No, -1.0);
        }
        block_multiply_accumulate(&mut diag, &v, Transpose::Yes, &arrow, Transpose::No, -1.0);
        diag.symmetrize();

        s_diag[i] = diag;
        s_arrow[i] = arrow;
    }

    SelectedInverse {
        layout: lay,
        s_diag,
        s_arrow,
        s_tip,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bta::{bta_factorize, BtaMatrix};

    #[test]
    fn identity_inverse_is_identity() {
        let lay = BtaLayout::new(2, 3, 1).unwrap();
        let mut q = BtaMatrix::zeros(lay);
        for i in 0..3 {
            *q.diag_mut(i) = Block::identity(2);
        }
        *q.tip_mut() = Block::identity(1);
        let s = bta_selected_inverse(&bta_factorize(&q).unwrap());
        for i in 0..3 {
            assert_eq!(s.diag(i), &Block::identity(2));
            assert_eq!(s.arrow(i), &Block::zeros(1, 2));
        }
        assert_eq!(s.tip(), &Block::identity(1));
    }

    #[test]
    fn diagonal_inverse_is_reciprocal() {
        let lay = BtaLayout::new(3, 2, 2).unwrap();
        let mut q = BtaMatrix::zeros(lay);
        let d = [1.0, 2.0, 4.0, 5.0, 8.0, 10.0, 16.0, 0.5];
        for i in 0..2 {
            for k in 0..3 {
                q.diag_mut(i)[(k, k)] = d[3 * i + k];
            }
        }
        q.tip_mut()[(0, 0)] = d[6];
        q.tip_mut()[(1, 1)] = d[7];
        let s = bta_selected_inverse(&bta_factorize(&q).unwrap());
        for (got, want) in s.diagonal().iter().zip(d.iter().map(|v| 1.0 / v)) {
            assert!((got - want).abs() <= 1e-15 * want);
        }
    }

    #[test]
    fn three_by_three_against_hand_inverse() {
        // [[2,-1,0],[-1,2,0.5],[0,0.5,3]] has determinant 8.5; cofactors give
        // the inverse diagonal (5.75, 6, 3)/8.5 and last row (-0.5, -1, 3)/8.5.
        let lay = BtaLayout::new(1, 2, 1).unwrap();
        let q = BtaMatrix::new(
            lay,
            vec![Block::from_rows(&[&[2.0]]), Block::from_rows(&[&[2.0]])],
            vec![Block::from_rows(&[&[-1.0]])],
            vec![Block::from_rows(&[&[0.0]]), Block::from_rows(&[&[0.5]])],
            Block::from_rows(&[&[3.0]]),
        )
        .unwrap();
        let s = bta_selected_inverse(&bta_factorize(&q).unwrap());
        let tol = 1e-15;
        assert!((s.diag(0)[(0, 0)] - 5.75 / 8.5).abs() < tol);
        assert!((s.diag(1)[(0, 0)] - 6.0 / 8.5).abs() < tol);
        assert!((s.tip()[(0, 0)] - 3.0 / 8.5).abs() < tol);
        assert!((s.arrow(0)[(0, 0)] + 0.5 / 8.5).abs() < tol);
        assert!((s.arrow(1)[(0, 0)] + 1.0 / 8.5).abs() < tol);
    }
}
