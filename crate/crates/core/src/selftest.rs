//! Dense-oracle equivalence checks shipped with the binary.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;

use crate::backend::{BackendRegistry, SolverBackend};
use crate::bta::{bta_factorize, bta_logdet, bta_selected_inverse, bta_solve, BtaLayout};
use crate::dense;
use crate::error::Error;
use crate::fixtures::{self, rel_frobenius};
use crate::inla::{latent_marginals, InlaProblem, ThetaPrior};
use crate::orchestrator::{StageTimes, TaskPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error, or the failure description.
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<String, String>;

fn check(ok: bool, worst: f64, tol: f64) -> Result<String, String> {
    let msg = format!("worst {worst:.3e} (tol {tol:.0e})");
    if ok && worst.is_finite() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_layout<R: Rng>(rng: &mut R) -> BtaLayout {
    BtaLayout::new(rng.random_range(1..=12), rng.random_range(1..=6), rng.random_range(0..=3)).expect("positive sizes")
}

fn factorization() -> Result<String, String> {
    let mut rng = fixtures::rng(11);
    let (mut recon_err, mut logdet_err, mut solve_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..10 {
        let q = fixtures::random_spd_bta(random_layout(&mut rng), 1.0, &mut rng);
        let l = bta_factorize(&q).map_err(|e| e.to_string())?;
        let ld = l.to_dense();
        let recon = dense::matmul(&ld, &ld.transpose());
        recon_err = recon_err.max(rel_frobenius(&recon, &q.to_dense()));
        let oracle = dense::cholesky_logdet(&dense::cholesky(&q.to_dense()).map_err(|e| e.to_string())?);
        logdet_err = logdet_err.max((bta_logdet(&l) - oracle).abs() / oracle.abs().max(1.0));
        let b: Vec<f64> = (0..q.layout().n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = bta_solve(&l, &b).map_err(|e| e.to_string())?;
        let r = q.matvec(&x).map_err(|e| e.to_string())?;
        let res = r.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        solve_err = solve_err.max(res / nb);
    }
    let msg = format!("reconstruction {recon_err:.3e}, logdet {logdet_err:.3e}, solve {solve_err:.3e}");
    if recon_err <= 1e-12 && logdet_err <= 1e-9 && solve_err <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn selected_inversion() -> Result<String, String> {
    let mut rng = fixtures::rng(12);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let q = fixtures::random_spd_bta(random_layout(&mut rng), 1.0, &mut rng);
        let lay = q.layout();
        let s = bta_selected_inverse(&bta_factorize(&q).map_err(|e| e.to_string())?);
        let inv = dense::Lu::new(&q.to_dense()).map_err(|e| e.to_string())?.inverse();
        let reference = crate::bta::SelectedInverse::from_dense_inverse(lay, &inv);
        for i in 0..lay.n_t() {
            worst = worst.max(rel_frobenius(s.diag(i), reference.diag(i)));
            if lay.n_b() > 0 {
                worst = worst.max(rel_frobenius(s.arrow(i), reference.arrow(i)));
            }
        }
        if lay.n_b() > 0 {
            worst = worst.max(rel_frobenius(s.tip(), reference.tip()));
        }
    }
    check(worst <= 1e-10, worst, 1e-10)
}

fn objective() -> Result<String, String> {
    let mut rng = fixtures::rng(13);
    let mut worst: f64 = 0.0;
    let plan = TaskPlan::sequential();
    for _ in 0..5 {
        let (spec, data, theta) = fixtures::random_model(3, 3, 4, 2, 60, &mut rng).map_err(|e| e.to_string())?;
        let prior = ThetaPrior::default();
        let oracle = fixtures::dense_objective(&spec, &data, &prior, &theta).map_err(|e| e.to_string())?;
        let problem = InlaProblem::new(spec, data, prior).map_err(|e| e.to_string())?;
        let (v, _) = problem.eval_objective(&theta, &plan);
        worst = worst.max((v.value - oracle).abs());
    }
    check(worst <= 1e-8, worst, 1e-8)
}

fn latent() -> Result<String, String> {
    let mut rng = fixtures::rng(14);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (spec, data, theta) = fixtures::random_model(2, 3, 3, 2, 30, &mut rng).map_err(|e| e.to_string())?;
        let (m, s) = fixtures::dense_latent_marginals(&spec, &data, &theta).map_err(|e| e.to_string())?;
        let problem = InlaProblem::new(spec, data, ThetaPrior::default()).map_err(|e| e.to_string())?;
        let lm = latent_marginals(&problem, &theta, &mut StageTimes::new()).map_err(|e| e.to_string())?;
        let scale = m.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for i in 0..m.len() {
            worst = worst.max((lm.means[i] - m[i]).abs() / scale);
            worst = worst.max((lm.sds[i] - s[i]).abs() / s[i]);
        }
    }
    check(worst <= 1e-8, worst, 1e-8)
}

fn backends_agree() -> Result<String, String> {
    let mut rng = fixtures::rng(15);
    let reg = BackendRegistry::with_defaults();
    let q = fixtures::random_spd_bta(BtaLayout::new(5, 4, 2).expect("layout"), 0.5, &mut rng);
    let run = |b: &dyn SolverBackend| b.factorize(&q).map(|f| f.logdet()).map_err(|e| e.to_string());
    let a = run(reg.get("bta").map_err(|e| e.to_string())?.as_ref())?;
    let d = run(reg.get("dense").map_err(|e| e.to_string())?.as_ref())?;
    let worst = (a - d).abs() / d.abs().max(1.0);
    check(worst <= 1e-12, worst, 1e-12)
}

/// An indefinite diagonal block must surface as `NotPositiveDefinite`.
fn indefinite_fixture() -> Result<String, String> {
    let mut rng = fixtures::rng(16);
    let mut q = fixtures::random_spd_bta(BtaLayout::new(4, 3, 1).expect("layout"), 0.0, &mut rng);
    q.diag_mut(1)[(2, 2)] = -50.0;
    match bta_factorize(&q) {
        Err(Error::NotPositiveDefinite { block_index: 1 }) => Ok("NotPositiveDefinite at block 1 (expected)".into()),
        Err(e) => Err(format!("unexpected error: {e}")),
        Ok(_) => Err("indefinite matrix was factorized".into()),
    }
}

const CASES: [(&str, Check); 6] = [
    ("bta factorization / logdet / solve", factorization),
    ("selected inversion", selected_inversion),
    ("objective vs dense pipeline", objective),
    ("latent marginals vs dense conditioning", latent),
    ("solver backends agree", backends_agree),
    ("indefinite fixture rejected", indefinite_fixture),
];

pub fn run_selftest() -> Vec<CaseResult> {
    CASES
        .iter()
        .map(|&(name, f)| {
            let t = Instant::now();
            let r = f();
            CaseResult {
                name,
                passed: r.is_ok(),
                detail: r.unwrap_or_else(|e| e),
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

/// Fixed-width pass/fail table.
pub fn selftest_table(results: &[CaseResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(4);
    let mut s = format!("{:<width$}  result  seconds  detail\n", "case");
    for r in results {
        let _ = writeln!(
            s,
            "{:<width$}  {:<6}  {:>7.3}  {}",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.seconds,
            r.detail
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_cases_pass() {
        let results = run_selftest();
        assert_eq!(results.len(), CASES.len());
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
