//! Plain dense linear algebra on full matrices.
//!
//! This is the reference path: it knows nothing about block structure and
//! shares no code with the BTA kernels beyond the storage type. It backs the
//! `dense` solver backend, the small `4 × 4` hyperparameter algebra, and the
//! bundled self-test.

use crate::error::{Error, Result};
use crate::kernels::Block;

/// Column-by-column (left-looking) Cholesky. Reads the lower triangle.
pub fn cholesky(a: &Block) -> Result<Block> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut l = Block::zeros(n, n);
    for j in 0..n {
        let mut col: Vec<f64> = (j..n).map(|i| a[(i, j)]).collect();
        for k in 0..j {
            let ljk = l[(j, k)];
            if ljk == 0.0 {
                continue;
            }
            for (off, i) in (j..n).enumerate() {
                col[off] -= l[(i, k)] * ljk;
            }
        }
        let d = col[0];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { block_index: j });
        }
        let p = d.sqrt();
        l[(j, j)] = p;
        for (off, i) in ((j + 1)..n).enumerate() {
            l[(i, j)] = col[off + 1] / p;
        }
    }
    Ok(l)
}

pub fn cholesky_logdet(l: &Block) -> f64 {
    2.0 * (0..l.rows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Solves `L Lᵀ x = b`.
pub fn cholesky_solve(l: &Block, b: &[f64]) -> Vec<f64> {
    let z = forward(l, b);
    backward_transposed(l, &z)
}

/// Solves `L z = b`.
pub fn forward(l: &Block, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

/// Solves `Lᵀ x = z`.
pub fn backward_transposed(l: &Block, z: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = z.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Block,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(a: &Block) -> Result<Lu> {
        let n = a.rows();
        assert_eq!(n, a.cols());
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pv == 0.0 || !pv.is_finite() {
                return Err(Error::InvalidModel(format!("singular matrix at column {k}")));
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    /// `(sign, log|det|)`.
    pub fn log_abs_det(&self) -> (f64, f64) {
        let n = self.lu.rows();
        let mut sign = self.sign;
        let mut acc = 0.0;
        for i in 0..n {
            let u = self.lu[(i, i)];
            if u < 0.0 {
                sign = -sign;
            }
            acc += u.abs().ln();
        }
        (sign, acc)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Block {
        let n = self.lu.rows();
        let mut inv = Block::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

pub fn matmul(a: &Block, b: &Block) -> Block {
    assert_eq!(a.cols(), b.rows());
    Block::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum())
}

pub fn matvec(a: &Block, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.cols(), x.len());
    (0..a.rows()).map(|i| a.row(i).iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Block, b: &Block) -> Block {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Block::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi sweeps.
/// Returns eigenvalues ascending and the matching eigenvectors as columns.
pub fn symmetric_eigen(a: &Block) -> (Vec<f64>, Block) {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    m.symmetrize();
    let mut v = Block::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let scale: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Block::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd() -> Block {
        Block::from_rows(&[
            &[4.0, 1.0, 0.5, 0.0],
            &[1.0, 3.0, 0.2, 0.1],
            &[0.5, 0.2, 2.0, 0.3],
            &[0.0, 0.1, 0.3, 1.5],
        ])
    }

    #[test]
    fn cholesky_and_lu_agree_on_logdet() {
        let a = spd();
        let l = cholesky(&a).unwrap();
        let (sign, lad) = Lu::new(&a).unwrap().log_abs_det();
        assert_eq!(sign, 1.0);
        assert!((cholesky_logdet(&l) - lad).abs() < 1e-13);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = spd();
        let inv = Lu::new(&a).unwrap().inverse();
        let mut p = matmul(&a, &inv);
        p.add_scaled(&Block::identity(4), -1.0);
        assert!(p.frobenius_norm() < 1e-14);
        let b = [1.0, -2.0, 0.5, 3.0];
        let x1 = cholesky_solve(&cholesky(&a).unwrap(), &b);
        let x2 = Lu::new(&a).unwrap().solve(&b);
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Block::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { block_index: 1 })));
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = spd();
        let (vals, vecs) = symmetric_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let lam = Block::from_fn(4, 4, |i, j| if i == j { vals[i] } else { 0.0 });
        let mut rec = matmul(&matmul(&vecs, &lam), &vecs.transpose());
        rec.add_scaled(&a, -1.0);
        assert!(rec.frobenius_norm() < 1e-12);
        let (vals, _) = symmetric_eigen(&Block::scaled_identity(3, 2.0));
        assert_eq!(vals, vec![2.0; 3]);
    }

    #[test]
    fn kron_shapes_and_entries() {
        let a = Block::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Block::identity(2);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(0, 2)], 2.0);
        assert_eq!(k[(3, 1)], 3.0);
        assert_eq!(k[(1, 2)], 0.0);
    }
}
