#![allow(dead_code)]

use bta_inla::bta::{BtaLayout, BtaMatrix};
use bta_inla::kernels::Block;
use bta_inla::model::Dataset;
use nalgebra::{DMatrix, DVector};

pub fn to_na(b: &Block) -> DMatrix<f64> {
    DMatrix::from_fn(b.rows(), b.cols(), |r, c| b[(r, c)])
}

pub fn bta_to_na(q: &BtaMatrix) -> DMatrix<f64> {
    let n = q.layout().n();
    DMatrix::from_fn(n, n, |r, c| q.get(r, c))
}

pub fn rel_fro(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let nb = b.norm();
    if nb == 0.0 {
        (a - b).norm()
    } else {
        (a - b).norm() / nb
    }
}

pub fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// `Ã = [A, Z]` assembled densely from the triplets.
pub fn projection(data: &Dataset) -> DMatrix<f64> {
    let lay = data.layout();
    let mut a = DMatrix::zeros(data.n_obs(), lay.n());
    for &(r, c, v) in &data.a().entries {
        a[(r, c)] += v;
    }
    for r in 0..data.n_obs() {
        for j in 0..lay.n_b() {
            a[(r, lay.n_st() + j)] = data.z()[(r, j)];
        }
    }
    a
}

/// Block `(bi, bj)` of a dense matrix in the BTA layout, tip index `n_t`.
pub fn block(m: &DMatrix<f64>, lay: BtaLayout, bi: usize, bj: usize) -> DMatrix<f64> {
    let range = |i: usize| {
        if i == lay.n_t() {
            (lay.n_st(), lay.n_b())
        } else {
            (i * lay.n_s(), lay.n_s())
        }
    };
    let (r0, nr) = range(bi);
    let (c0, nc) = range(bj);
    m.view((r0, c0), (nr, nc)).into_owned()
}
