//! Kernel timing over a ladder of problem sizes.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;

use crate::bta::{bta_factorize, bta_selected_inverse, BtaLayout, BtaMatrix};
use crate::config::Rung;
use crate::error::Result;
use crate::fixtures;
use crate::io::fmt_f64;
use crate::model::{assemble_conditional_precision, assemble_prior_precision, build_lattice_spec, HyperParameters};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n_s: usize,
    pub n_t: usize,
    pub n: usize,
    pub n_o: usize,
    pub median_factorize: f64,
    pub median_selinv: f64,
}

impl BenchRow {
    pub fn median_kernel(&self) -> f64 {
        self.median_factorize + self.median_selinv
    }
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Most square `rows × cols = n_s` lattice.
pub fn lattice_shape(n_s: usize) -> (usize, usize) {
    let mut rows = (n_s as f64).sqrt() as usize;
    while rows > 1 && n_s % rows != 0 {
        rows -= 1;
    }
    (rows.max(1), n_s / rows.max(1))
}

/// Conditional precision of a lattice model with `n_o` random observations.
pub fn kernel_matrix<R: Rng>(n_s: usize, n_t: usize, n_b: usize, n_o: usize, rng: &mut R) -> Result<BtaMatrix> {
    let (rows, cols) = lattice_shape(n_s);
    let spec = build_lattice_spec(rows, cols, n_t, n_b, 1e-3)?;
    let layout = BtaLayout::new(n_s, n_t, n_b)?;
    let data = fixtures::random_dataset(layout, n_o, rng)?;
    let theta = HyperParameters::new(0.5, 0.0, 0.0, 0.0);
    assemble_conditional_precision(&assemble_prior_precision(&spec, &theta), &data, &theta)
}

/// Times factorization and selected inversion of `q`, `reps` times each.
pub fn time_kernels(q: &BtaMatrix, reps: usize) -> Result<(f64, f64)> {
    let mut fac = Vec::with_capacity(reps);
    let mut sel = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        let l = bta_factorize(q)?;
        fac.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        let s = bta_selected_inverse(&l);
        sel.push(t.elapsed().as_secs_f64());
        std::hint::black_box(s);
    }
    Ok((median(&mut fac), median(&mut sel)))
}

pub fn run_benchmark(ladder: &[Rung], n_b: usize, reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    let mut rng = fixtures::rng(seed);
    let mut rows = Vec::with_capacity(ladder.len());
    for rung in ladder {
        let n_o = rung.n_o.unwrap_or(2 * rung.n_s * rung.n_t);
        let q = kernel_matrix(rung.n_s, rung.n_t, n_b, n_o, &mut rng)?;
        let (f, s) = time_kernels(&q, reps)?;
        rows.push(BenchRow {
            n_s: rung.n_s,
            n_t: rung.n_t,
            n: q.layout().n(),
            n_o,
            median_factorize: f,
            median_selinv: s,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("n_s,n_t,n,median_seconds_factorize,median_seconds_selinv\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.n_s, r.n_t, r.n, fmt_f64(r.median_factorize), fmt_f64(r.median_selinv));
    }
    s
}
