//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use bta_inla::bench::{kernel_matrix, median, time_kernels};
use bta_inla::bta::{bta_factorize, bta_logdet, bta_selected_inverse, bta_solve, BtaLayout, BtaMatrix};
use bta_inla::commands::{fit_exit_code, run_fit, simulate, EXIT_OK};
use bta_inla::config::RunConfig;
use bta_inla::fixtures;
use bta_inla::inla::{gradient_fd, latent_marginals, InferenceReport, InlaProblem, ThetaPrior};
use bta_inla::io;
use bta_inla::orchestrator::{StageTimes, TaskPlan};
use bta_inla::simgen::Simulation;
use common::{block, bta_to_na, dvec, rel_fro, rel_vec, to_na};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

fn within_budget(o: Outcome, took: Duration, budget: Duration) -> Outcome {
    let detail = format!("{}; {:.1}s of {:.0}s", o.detail, took.as_secs_f64(), budget.as_secs_f64());
    Outcome::new(o.passed && took <= budget, detail)
}

/// Seeded SPD BTA family shared by the factorization and inversion suites.
/// The first instance is the largest allowed shape.
fn bta_family() -> Vec<BtaMatrix> {
    let mut rng = fixtures::rng(2024);
    (0..50)
        .map(|k| {
            let lay = if k == 0 {
                BtaLayout::new(40, 20, 4).unwrap()
            } else {
                BtaLayout::new(rng.random_range(1..=40), rng.random_range(1..=20), rng.random_range(0..=4)).unwrap()
            };
            fixtures::random_spd_bta(lay, 1.0, &mut rng)
        })
        .collect()
}

fn condition_number(q: &BtaMatrix) -> f64 {
    let ev = bta_to_na(q).symmetric_eigenvalues();
    ev.max() / ev.min()
}

fn criterion_1(family: &[BtaMatrix]) -> Outcome {
    let mut worst = [0.0f64; 3];
    let mut failed = 0;
    let mut rng = fixtures::rng(7);
    for q in family {
        let qd = bta_to_na(q);
        let Ok(l) = bta_factorize(q) else {
            failed += 1;
            continue;
        };
        let ld = to_na(&l.to_dense());
        let recon = rel_fro(&(&ld * ld.transpose()), &qd);
        let oracle_ld = 2.0 * qd.clone().cholesky().unwrap().l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let logdet = (bta_logdet(&l) - oracle_ld).abs() / oracle_ld.abs().max(f64::MIN_POSITIVE);
        let b: Vec<f64> = (0..q.layout().n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = bta_solve(&l, &b).unwrap();
        let solve = rel_vec((&qd * dvec(&x)).as_slice(), &b);
        for (w, v) in worst.iter_mut().zip([recon, logdet, solve]) {
            *w = w.max(v);
        }
    }
    let passed = failed == 0 && worst[0] <= 1e-12 && worst[1] <= 1e-9 && worst[2] <= 1e-10;
    Outcome::new(
        passed,
        format!(
            "{} matrices, reconstruction {:.2e}, logdet {:.2e}, solve {:.2e}, {failed} factorization failures",
            family.len(),
            worst[0],
            worst[1],
            worst[2]
        ),
    )
}

fn criterion_2(family: &[BtaMatrix]) -> Outcome {
    let mut worst = 0.0f64;
    let mut factor_changed = 0;
    for q in family {
        let lay = q.layout();
        let l = bta_factorize(q).unwrap();
        let before = l.clone();
        let s = bta_selected_inverse(&l);
        if l != before {
            factor_changed += 1;
        }
        let inv = bta_to_na(q).try_inverse().unwrap();
        for i in 0..lay.n_t() {
            worst = worst.max(rel_fro(&to_na(s.diag(i)), &block(&inv, lay, i, i)));
            if lay.n_b() > 0 {
                worst = worst.max(rel_fro(&to_na(s.arrow(i)), &block(&inv, lay, lay.n_t(), i)));
            }
        }
        if lay.n_b() > 0 {
            worst = worst.max(rel_fro(&to_na(s.tip()), &block(&inv, lay, lay.n_t(), lay.n_t())));
        }
    }
    Outcome::new(
        worst <= 1e-10 && factor_changed == 0,
        format!("worst block {worst:.2e}, factors modified {factor_changed}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = fixtures::rng(303);
    let plan = TaskPlan::sequential();
    let mut worst = 0.0f64;
    let mut largest = (0, 0);
    for _ in 0..20 {
        let (rows, cols) = (rng.random_range(2..=4), rng.random_range(2..=4));
        let n_b = rng.random_range(0..=4);
        let n_t = rng.random_range(2..=(196 / (rows * cols)).min(12));
        let n = rows * cols * n_t + n_b;
        let n_o = rng.random_range(1..=500);
        let (spec, data, theta) = fixtures::random_model(rows, cols, n_t, n_b, n_o, &mut rng).unwrap();
        let prior = ThetaPrior::default();
        let dense = fixtures::dense_objective(&spec, &data, &prior, &theta).unwrap();
        let problem = InlaProblem::new(spec, data, prior).unwrap();
        let (v, _) = problem.eval_objective(&theta, &plan);
        worst = worst.max((v.value - dense).abs());
        largest = largest.max((n, n_o));
    }
    Outcome::new(
        worst <= 1e-8,
        format!("20 models up to n={} n_o={}, worst |diff| {worst:.2e}", largest.0, largest.1),
    )
}

/// Median factorize+selinv time per matrix. One warm-up pass, then the
/// matrices are timed round-robin so that clock drift and cache state affect
/// every size alike.
fn interleaved_kernel_medians(mats: &[BtaMatrix], rounds: usize) -> Vec<f64> {
    let mut samples = vec![Vec::with_capacity(rounds); mats.len()];
    for q in mats {
        time_kernels(q, 1).unwrap();
    }
    for _ in 0..rounds {
        for (q, acc) in mats.iter().zip(samples.iter_mut()) {
            let (f, s) = time_kernels(q, 1).unwrap();
            acc.push(f + s);
        }
    }
    samples.iter_mut().map(|v| median(v)).collect()
}

fn criterion_4() -> Outcome {
    let mut rng = fixtures::rng(404);
    let mats: Vec<BtaMatrix> = [32, 64, 128, 256]
        .into_iter()
        .map(|n_t| kernel_matrix(64, n_t, 4, 2 * (64 * n_t + 4), &mut rng).unwrap())
        .collect();
    let times = interleaved_kernel_medians(&mats, 11);
    let ratios: Vec<f64> = times.windows(2).map(|w| w[1] / w[0]).collect();
    let passed = ratios.iter().all(|r| (1.6..=2.6).contains(r));
    let fmt: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    Outcome::new(passed, format!("median kernel ratios per doubling [{}]", fmt.join(", ")))
}

fn criterion_5() -> Outcome {
    let mut rng = fixtures::rng(505);
    let n = 64 * 32 + 4;
    let mats: Vec<BtaMatrix> = [n, 2 * n, 4 * n]
        .into_iter()
        .map(|n_o| kernel_matrix(64, 32, 4, n_o, &mut rng).unwrap())
        .collect();
    let times = interleaved_kernel_medians(&mats, 21);
    let lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = times.iter().cloned().fold(0.0, f64::max);
    let band = (hi - lo) / lo;
    Outcome::new(
        band <= 0.2,
        format!(
            "medians {:.3}/{:.3}/{:.3} ms, band {:.1}%",
            times[0] * 1e3,
            times[1] * 1e3,
            times[2] * 1e3,
            band * 100.0
        ),
    )
}

struct CalibrationRun {
    cfg: RunConfig,
    sim: Simulation,
    report: InferenceReport,
}

fn calibration_config(seed: u64) -> RunConfig {
    let text = format!("rows = 8\ncols = 8\nn_t = 16\nn_b = 4\nobs_ratio = 2\nseed = {seed}\n");
    RunConfig::parse(&text, std::path::Path::new("calibration.cfg")).unwrap()
}

fn calibrate(seed: u64, workers: usize) -> CalibrationRun {
    let cfg = calibration_config(seed);
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let sim = simulate(&cfg, &data).unwrap();
    let report = run_fit(&cfg, &data, &dir.path().join("out"), workers).unwrap();
    CalibrationRun { cfg, sim, report }
}

fn criterion_6(runs: &[CalibrationRun]) -> Outcome {
    let mut exit_ok = 0;
    let mut monotone = 0;
    let mut theta_ok = 0;
    let mut beta_ok = 0;
    let mut theta_misses = Vec::new();
    for run in runs {
        let r = &run.report;
        if fit_exit_code(r) == EXIT_OK {
            exit_ok += 1;
        }
        if r.trace.windows(2).all(|w| w[1].value <= w[0].value) {
            monotone += 1;
        }
        let truth = run.sim.truth.theta.to_array();
        let within = r.hyper_marginals.as_ref().is_some_and(|hm| {
            hm.iter().zip(truth).all(|(m, t)| (m.mode_log - t).abs() <= 3.0 * m.sd_log)
        });
        if within {
            theta_ok += 1;
        } else {
            theta_misses.push(run.cfg.seed);
        }
        let n_st = run.sim.data.layout().n_st();
        let beta_within = run.sim.truth.beta.iter().enumerate().all(|(j, b)| {
            (r.latent_means[n_st + j] - b).abs() <= 3.0 * r.latent_sds[n_st + j]
        });
        if beta_within {
            beta_ok += 1;
        }
    }
    let k = runs.len();
    let passed = exit_ok == k && monotone == k && theta_ok >= 4 && beta_ok == k;
    Outcome::new(
        passed,
        format!(
            "exit 0 {exit_ok}/{k}, monotone {monotone}/{k}, theta within 3 sd {theta_ok}/{k} (misses {theta_misses:?}), beta within 3 sd {beta_ok}/{k}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = fixtures::rng(707);
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let (rows, cols, n_t, n_b) = (
            rng.random_range(2..=4),
            rng.random_range(2..=4),
            rng.random_range(2..=6),
            rng.random_range(0..=3),
        );
        let n_o = rng.random_range(5..=120);
        let (spec, data, theta) = fixtures::random_model(rows, cols, n_t, n_b, n_o, &mut rng).unwrap();
        let (mean_ref, sd_ref) = fixtures::dense_latent_marginals(&spec, &data, &theta).unwrap();
        let problem = InlaProblem::new(spec, data, ThetaPrior::default()).unwrap();
        let lm = latent_marginals(&problem, &theta, &mut StageTimes::new()).unwrap();
        worst.0 = worst.0.max(rel_vec(&lm.means, &mean_ref));
        worst.1 = worst.1.max(rel_vec(&lm.sds, &sd_ref));
    }
    Outcome::new(
        worst.0 <= 1e-8 && worst.1 <= 1e-8,
        format!("means {:.2e}, sds {:.2e}", worst.0, worst.1),
    )
}

fn report_files(r: &InferenceReport) -> (String, String, String) {
    (io::hyper_csv(r), io::latent_csv(r), io::trace_csv(r))
}

fn wall<F: FnMut()>(reps: usize, mut f: F) -> f64 {
    let mut t: Vec<f64> = (0..reps)
        .map(|_| {
            let s = Instant::now();
            f();
            s.elapsed().as_secs_f64()
        })
        .collect();
    median(&mut t)
}

fn criterion_8(reference: &CalibrationRun) -> Outcome {
    let expected = report_files(&reference.report);
    let mut mismatched = Vec::new();
    for workers in [1, 2, 4, 8] {
        let run = calibrate(reference.cfg.seed, workers);
        if report_files(&run.report) != expected || run.report.theta_mode != reference.report.theta_mode {
            mismatched.push(workers);
        }
    }
    let determinism = mismatched.is_empty();

    let cfg = &reference.cfg;
    let problem = InlaProblem::new(reference.sim.spec.clone(), reference.sim.data.clone(), cfg.prior()).unwrap();
    let theta0 = cfg.theta0().to_array();
    let h = cfg.fit_options().bfgs.fd_step;
    let batch = |plan: &TaskPlan| {
        wall(5, || {
            gradient_fd(&problem, &theta0, h, plan, &mut StageTimes::new()).unwrap();
        })
    };
    let t1 = batch(&TaskPlan::new(1, false).unwrap());
    let t4 = batch(&TaskPlan::new(4, false).unwrap());
    let speedup_ratio = t4 / t1;
    let single = |plan: &TaskPlan| {
        wall(9, || {
            problem.eval_objective(&cfg.theta0(), plan);
        })
    };
    let unsplit = single(&TaskPlan::new(2, false).unwrap());
    let split = single(&TaskPlan::new(2, true).unwrap());
    let layer2 = unsplit / split;

    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let speedup_part = if cores >= 4 {
        (speedup_ratio <= 0.6, format!("batch ratio {speedup_ratio:.2}"))
    } else {
        (true, format!("batch ratio {speedup_ratio:.2} (N/A: {cores} core(s), needs 4)"))
    };
    let layer2_part = if cores >= 2 {
        (layer2 >= 1.2, format!("layer-2 gain {layer2:.2}x"))
    } else {
        (true, format!("layer-2 gain {layer2:.2}x (N/A: {cores} core(s), needs 2)"))
    };
    Outcome::new(
        determinism && speedup_part.0 && layer2_part.0,
        format!(
            "identical reports for workers 1/2/4/8: {} (mismatch {mismatched:?}); {}; {}",
            if determinism { "yes" } else { "no" },
            speedup_part.1,
            layer2_part.1
        ),
    )
}

fn criterion_9(runs: &[CalibrationRun]) -> Outcome {
    let plan = TaskPlan::sequential();
    let mut worst = 0.0f64;
    let mut spd = 0;
    for run in runs {
        let cfg = &run.cfg;
        let problem = InlaProblem::new(run.sim.spec.clone(), run.sim.data.clone(), cfg.prior()).unwrap();
        let h = cfg.fit_options().bfgs.fd_step;
        let theta = cfg.theta0().to_array();
        let g1 = gradient_fd(&problem, &theta, h, &plan, &mut StageTimes::new()).unwrap();
        let g2 = gradient_fd(&problem, &theta, h / 10.0, &plan, &mut StageTimes::new()).unwrap();
        for (a, b) in g1.gradient.iter().zip(&g2.gradient) {
            worst = worst.max((a - b).abs() / b.abs());
        }
        if run.report.converged() && run.report.hessian_is_positive_definite() {
            spd += 1;
        }
    }
    Outcome::new(
        worst <= 1e-3 && spd == runs.len(),
        format!(
            "gradient h vs h/10 worst rel {worst:.2e}, SPD Hessian at {spd}/{} converged modes",
            runs.len()
        ),
    )
}

fn main() {
    // `cargo test -- --list` and filters pass arguments; there is only one
    // test here, so listing reports it and any filter still runs it.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }

    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut record = |k: usize, budget_s: u64, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let o = within_budget(o, start.elapsed(), Duration::from_secs(budget_s));
        println!("criterion {k}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((k, o));
    };

    let family = bta_family();
    let worst_cond = family.iter().map(condition_number).fold(0.0, f64::max);
    println!("bta family: {} matrices, largest condition number {worst_cond:.2e}", family.len());
    assert!(worst_cond <= 1e8, "fixture family exceeds the condition bound");

    record(1, 30, &mut || criterion_1(&family));
    record(2, 30, &mut || criterion_2(&family));
    record(3, 60, &mut criterion_3);
    record(4, 300, &mut criterion_4);
    record(5, 180, &mut criterion_5);
    let mut runs = Vec::new();
    record(6, 600, &mut || {
        runs = (1..=5).map(|seed| calibrate(seed, TaskPlan::default_workers(4))).collect();
        criterion_6(&runs)
    });
    record(7, 60, &mut criterion_7);
    record(8, 600, &mut || criterion_8(&runs[0]));
    record(9, 600, &mut || criterion_9(&runs));

    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.passed).map(|(k, _)| *k).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
