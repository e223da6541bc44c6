//! Seeded random instances and dense reference computations, shared by the
//! `selftest` command and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bta::{BtaLayout, BtaMatrix};
use crate::dense;
use crate::error::Result;
use crate::inla::{log_prior_theta, ThetaPrior};
use crate::kernels::Block;
use crate::model::{
    assemble_conditional_precision, assemble_prior_precision, build_lattice_spec, conditional_mean_rhs, Dataset,
    HyperParameters, ModelSpec, Triplets,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_block<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Block {
    Block::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random SPD BTA matrix: Gaussian blocks made diagonally dominant, then
/// congruence-scaled by `diag(10^s_k)` with `s_k` uniform on
/// `[−spread, spread]`. The scaling keeps SPD-ness and raises the condition
/// number by at most `10^(4·spread)`.
pub fn random_spd_bta<R: Rng>(layout: BtaLayout, spread: f64, rng: &mut R) -> BtaMatrix {
    let (n_s, n_t, n_b) = (layout.n_s(), layout.n_t(), layout.n_b());
    let mut q = BtaMatrix::zeros(layout);
    for i in 0..n_t {
        let mut d = gaussian_block(n_s, n_s, rng);
        d.symmetrize();
        *q.diag_mut(i) = d;
        *q.arrow_mut(i) = gaussian_block(n_b, n_s, rng);
        if i + 1 < n_t {
            *q.sub_mut(i) = gaussian_block(n_s, n_s, rng);
        }
    }
    let mut t = gaussian_block(n_b, n_b, rng);
    t.symmetrize();
    *q.tip_mut() = t;

    let n = layout.n();
    let mut row_abs = vec![0.0; n];
    let dense = q.to_dense();
    for (r, acc) in row_abs.iter_mut().enumerate() {
        *acc = dense.row(r).iter().map(|v| v.abs()).sum();
    }
    let scale: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-spread..=spread))).collect();
    for i in 0..n_t {
        let off = i * n_s;
        let d = q.diag_mut(i);
        for r in 0..n_s {
            d[(r, r)] += row_abs[off + r] + 1.0;
        }
    }
    for r in 0..n_b {
        q.tip_mut()[(r, r)] += row_abs[layout.n_st() + r] + 1.0;
    }
    apply_congruence(&mut q, &scale);
    q
}

fn apply_congruence(q: &mut BtaMatrix, s: &[f64]) {
    let layout = q.layout();
    let (n_s, n_t) = (layout.n_s(), layout.n_t());
    let tip0 = layout.n_st();
    let scale = |b: &mut Block, ro: usize, co: usize| {
        for r in 0..b.rows() {
            for c in 0..b.cols() {
                b[(r, c)] *= s[ro + r] * s[co + c];
            }
        }
    };
    for i in 0..n_t {
        scale(q.diag_mut(i), i * n_s, i * n_s);
        scale(q.arrow_mut(i), tip0, i * n_s);
        if i + 1 < n_t {
            scale(q.sub_mut(i), (i + 1) * n_s, i * n_s);
        }
    }
    scale(q.tip_mut(), tip0, tip0);
}

/// Random dataset on `layout`: each row has one to three nonzeros inside one
/// uniformly chosen time block, `Z` is Gaussian.
pub fn random_dataset<R: Rng>(layout: BtaLayout, n_o: usize, rng: &mut R) -> Result<Dataset> {
    let mut entries = Vec::new();
    for r in 0..n_o {
        let t = rng.random_range(0..layout.n_t());
        let k = rng.random_range(1..=3.min(layout.n_s()));
        for _ in 0..k {
            let c = t * layout.n_s() + rng.random_range(0..layout.n_s());
            entries.push((r, c, rng.random_range(0.2..1.5)));
        }
    }
    let a = Triplets::new(n_o, layout.n_st(), entries)?;
    let z = gaussian_block(n_o, layout.n_b(), rng);
    let y = (0..n_o).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    Dataset::new(layout, y, a, z)
}

/// Random lattice model with a random dataset and a θ drawn from
/// `[−1, 1]⁴`.
pub fn random_model<R: Rng>(
    rows: usize,
    cols: usize,
    n_t: usize,
    n_b: usize,
    n_o: usize,
    rng: &mut R,
) -> Result<(ModelSpec, Dataset, HyperParameters)> {
    let spec = build_lattice_spec(rows, cols, n_t, n_b, rng.random_range(0.05..2.0))?;
    let data = random_dataset(spec.layout(), n_o, rng)?;
    let mut th = || rng.random_range(-1.0..1.0);
    let theta = HyperParameters::new(th(), th(), th(), th());
    Ok((spec, data, theta))
}

/// Dense `Ã = [A, Z]`.
pub fn dense_projection(data: &Dataset) -> Block {
    let lay = data.layout();
    let mut a = Block::zeros(data.n_obs(), lay.n());
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

/// Objective by dense Cholesky of the assembled `n × n` matrices.
pub fn dense_objective(spec: &ModelSpec, data: &Dataset, prior: &ThetaPrior, theta: &HyperParameters) -> Result<f64> {
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let n = spec.layout().n() as f64;
    let n_o = data.n_obs() as f64;
    let tau = theta.tau_y();
    let q_x = assemble_prior_precision(spec, theta).to_dense();
    let at = dense_projection(data);
    let mut q_xy = dense::matmul(&at.transpose(), &at);
    q_xy.scale(tau);
    q_xy.add_scaled(&q_x, 1.0);
    let l_x = dense::cholesky(&q_x)?;
    let l_xy = dense::cholesky(&q_xy)?;
    let rhs: Vec<f64> = dense::matvec(&at.transpose(), data.y()).iter().map(|v| tau * v).collect();
    let x = dense::cholesky_solve(&l_xy, &rhs);
    let qx_x = dense::matvec(&q_x, &x);
    let quad: f64 = x.iter().zip(&qx_x).map(|(a, b)| a * b).sum();
    let fit = dense::matvec(&at, &x);
    let rss: f64 = data.y().iter().zip(&fit).map(|(y, f)| (y - f) * (y - f)).sum();
    let log_latent = 0.5 * dense::cholesky_logdet(&l_x) - 0.5 * n * ln2pi - 0.5 * quad;
    let log_lik = 0.5 * n_o * theta.log_tau_y - 0.5 * n_o * ln2pi - 0.5 * tau * rss;
    let log_cond = 0.5 * dense::cholesky_logdet(&l_xy) - 0.5 * n * ln2pi;
    Ok(-(log_prior_theta(theta, prior) + log_latent + log_lik - log_cond))
}

/// Conditional means and marginal sds via a dense inverse of `Q_{x|y}`.
pub fn dense_latent_marginals(spec: &ModelSpec, data: &Dataset, theta: &HyperParameters) -> Result<(Vec<f64>, Vec<f64>)> {
    let q_x = assemble_prior_precision(spec, theta);
    let q_xy = assemble_conditional_precision(&q_x, data, theta)?.to_dense();
    let lu = dense::Lu::new(&q_xy)?;
    let mean = lu.solve(&conditional_mean_rhs(data, theta));
    let sds = lu.inverse().diagonal().into_iter().map(f64::sqrt).collect();
    Ok((mean, sds))
}

/// Largest relative blockwise error scaled by the reference norm.
pub fn rel_frobenius(a: &Block, b: &Block) -> f64 {
    let mut d = a.clone();
    d.add_scaled(b, -1.0);
    let nb = b.frobenius_norm();
    if nb == 0.0 {
        d.frobenius_norm()
    } else {
        d.frobenius_norm() / nb
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bta::bta_factorize;

    #[test]
    fn random_bta_is_spd() {
        let mut r = rng(1);
        for _ in 0..10 {
            let lay = BtaLayout::new(r.random_range(1..6), r.random_range(1..5), r.random_range(0..3)).unwrap();
            let q = random_spd_bta(lay, 1.0, &mut r);
            assert!(bta_factorize(&q).is_ok());
        }
    }

    #[test]
    fn random_dataset_respects_block_rule() {
        let lay = BtaLayout::new(4, 3, 2).unwrap();
        let d = random_dataset(lay, 30, &mut rng(2)).unwrap();
        assert_eq!(d.n_obs(), 30);
    }
}
