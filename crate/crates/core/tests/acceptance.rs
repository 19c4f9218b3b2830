//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line each.
//! With `RWLASSO_ACCEPTANCE_STRICT=1` any failure makes the process exit 1.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rwlasso::diagnostics::{
    irrepresentable_from_gram, ks_critical_value, normality_check, tv_distance, Ecdf, IRREPRESENTABLE_SLACK, TV_STEP,
};
use rwlasso::linalg::Matrix;
use rwlasso::model::{Dataset, SupportSet};
use rwlasso::rng::{derive_seed, Domain};
use rwlasso::sampler::{cross_validate, cross_validate_both, default_lambda_grid, two_step_sample, CvMode};
use rwlasso::sim::{
    build_beta0, generate_dataset, orthogonal_dataset, orthogonal_design, run_experiment, ErrorLaw, ExperimentConfig,
    Method, SimSetting,
};
use rwlasso::solver::{kkt_certificate, solve_lasso, solve_weighted_lasso, weighted_ls_refit, SolverConfig, WeightedProblem};
use rwlasso::weights::{draw_weights, WeightDistribution, WeightDraw, WeightScheme};

const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn dataset(x: &[Vec<f64>], y: &[f64]) -> Dataset {
    Dataset::from_centered(Matrix::from_rows(x).unwrap(), y.to_vec()).unwrap()
}

fn solver_optimality() -> Outcome {
    let mut rng = common::rng(SEED);
    let dist = WeightDistribution::default();
    let cfg = SolverConfig::default();
    let (mut worst_kkt, mut worst_diff) = (0.0f64, 0.0f64);
    for inst in 0..200u64 {
        let p = rng.random_range(1..=20);
        let n = rng.random_range(p + 5..=50);
        let (x, y) = common::random_problem(&mut rng, n, p, p.min(4));
        let data = dataset(&x, &y);
        let scheme = WeightScheme::ALL[inst as usize % 3];
        let w = draw_weights(&dist, scheme, n, p, SEED, inst).unwrap();
        let lmax = WeightedProblem::new(&data, &w).unwrap().lambda_max();
        let frac = match inst % 10 {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random_range(0.0..1.0),
        };
        let lambda = frac * lmax;
        let fit = solve_weighted_lasso(&data, &w, lambda, &cfg).unwrap();
        let oracle = common::fista(&x, &y, &w.w_obs, &w.w_pen, lambda);
        worst_kkt = worst_kkt.max(kkt_certificate(&data, &w, lambda, &fit.beta).unwrap());
        for (a, b) in fit.beta.iter().zip(&oracle) {
            worst_diff = worst_diff.max((a - b).abs());
        }
    }
    outcome(
        worst_kkt <= 1e-8 && worst_diff <= 1e-6,
        format!("max kkt {worst_kkt:.2e}, max |diff| vs proximal gradient {worst_diff:.2e}"),
    )
}

fn scheme_equivalence() -> Outcome {
    let mut rng = common::rng(SEED + 1);
    let cfg = SolverConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = rng.random_range(2..=7);
        let n = rng.random_range(p + 5..=40);
        let (x, y) = common::random_problem(&mut rng, n, p, 2);
        let data = dataset(&x, &y);
        let lmax = WeightedProblem::new(&data, &WeightDraw::unit(n, p)).unwrap().lambda_max();
        let lambda = rng.random_range(0.0..1.0) * lmax;
        let fit = solve_weighted_lasso(&data, &WeightDraw::unit(n, p), lambda, &cfg).unwrap();
        let exact = common::lasso_by_enumeration(&x, &y, lambda);
        for (a, b) in fit.beta.iter().zip(&exact) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst <= 1e-6, format!("max |diff| vs enumerated lasso {worst:.2e}"))
}

fn conditional_selection() -> Outcome {
    let (n, p) = (500, 10);
    let beta0 = build_beta0(p, 6).unwrap();
    let x = orthogonal_design(n, p, SEED).unwrap();
    let s0 = SupportSet::from_beta(&beta0);
    let cfg = SolverConfig::default();
    let mut fractions = Vec::new();
    for r in 0..20u64 {
        let data = orthogonal_dataset(&x, &beta0, ErrorLaw::StdNormal, SEED, r).unwrap();
        let grid = default_lambda_grid(&data, 100, 1e-3);
        let cv_seed = derive_seed(SEED, Domain::Folds, r);
        let cv = cross_validate(&data, 5, &grid, CvMode::TwoStepLassoLs, cv_seed, &cfg).unwrap();
        let seed = derive_seed(SEED, Domain::Method, r);
        let batch = two_step_sample(&data, cv.chosen_lambda, 1000, &WeightDistribution::default(), WeightScheme::ObsOnly, seed, &cfg)
            .unwrap();
        fractions.push(batch.selected.iter().filter(|s| **s == s0).count() as f64 / 1000.0);
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let min = fractions.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(mean > 0.90, format!("mean P(S_w = S0) {mean:.4} (min over replicates {min:.3})"))
}

fn sparse_normality() -> Outcome {
    let (n, p, q, b) = (2000, 10, 3, 2000);
    let mut beta0 = vec![0.0; p];
    beta0[..q].copy_from_slice(&[3.0, -2.0, 2.5]);
    let x = orthogonal_design(n, p, SEED).unwrap();
    let cfg = SolverConfig::default();
    let crit = ks_critical_value(b, 0.01);
    let mut passed = 0;
    let mut stats = Vec::new();
    for r in 0..20u64 {
        let data = orthogonal_dataset(&x, &beta0, ErrorLaw::StdNormal, SEED + 1, r).unwrap();
        let grid = default_lambda_grid(&data, 100, 1e-3);
        let cv = cross_validate(&data, 5, &grid, CvMode::TwoStepLassoLs, derive_seed(SEED, Domain::Folds, r), &cfg).unwrap();
        let lasso = solve_lasso(&data, cv.chosen_lambda, &cfg).unwrap();
        let center = weighted_ls_refit(&data, &WeightDraw::unit(n, p), &lasso.active).unwrap();
        let resid: Vec<f64> = data.y().iter().zip(data.predict(&center)).map(|(y, f)| y - f).collect();
        let sigma2 = resid.iter().map(|e| e * e).sum::<f64>() / (n - lasso.active.len()) as f64;
        // only the block of truly relevant coordinates is tested
        let support = SupportSet::from_beta(&beta0);
        // target sigma_W^2 sigma_eps^2 C11^{-1}; C11 = I on this design and
        // Exp(1) weights have unit variance
        let k = support.len();
        let mut cov = Matrix::zeros(k, k);
        let c11: Vec<Vec<f64>> = support
            .indices()
            .iter()
            .map(|&a| support.indices().iter().map(|&c| (0..n).map(|i| x[(i, a)] * x[(i, c)]).sum::<f64>() / n as f64).collect())
            .collect();
        let inv = invert(&c11);
        for a in 0..k {
            for c in 0..k {
                cov[(a, c)] = sigma2 * inv[a][c];
            }
        }
        let seed = derive_seed(SEED + 1, Domain::Method, r);
        let batch = two_step_sample(&data, cv.chosen_lambda, b, &WeightDistribution::default(), WeightScheme::ObsOnly, seed, &cfg)
            .unwrap();
        let rep = normality_check(&batch, &center, &support, &cov).unwrap();
        stats.push(rep.ks_stat);
        if rep.ks_stat < crit {
            passed += 1;
        }
    }
    let worst = stats.iter().cloned().fold(0.0f64, f64::max);
    outcome(
        passed >= 18,
        format!("{passed}/20 replicates pass KS at alpha 0.01 (critical {crit:.4}, worst stat {worst:.4})"),
    )
}

/// Inverse of a small symmetric matrix, column by column.
fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    (0..k)
        .map(|c| {
            let e: Vec<f64> = (0..k).map(|r| if r == c { 1.0 } else { 0.0 }).collect();
            common::gauss_solve(a.to_vec(), e).unwrap()
        })
        .collect::<Vec<_>>()
}

fn experiment(id: u8, replicates: usize, draws: usize, methods: Vec<Method>) -> Vec<rwlasso::sim::ReplicateResult> {
    let setting = SimSetting::table1(id).unwrap().with_scale(replicates, draws);
    let cfg = ExperimentConfig {
        methods,
        ..Default::default()
    };
    run_experiment(&setting, &cfg, SEED).unwrap()
}

fn coverage_reproduction() -> Outcome {
    let res = experiment(8, 100, 500, vec![Method::TwoStep(WeightScheme::ObsOnly), Method::ResidualBootstrap]);
    let coverage = |m: usize, j: usize| {
        res.iter()
            .filter(|r| r.methods[m].report.as_ref().and_then(|rep| rep.covered.as_ref()).is_some_and(|c| c[j]))
            .count() as f64
            / res.len() as f64
    };
    let failed: usize = res.iter().flat_map(|r| &r.methods).filter(|m| m.report.is_none()).count();
    let rw1: Vec<f64> = (0..6).map(|j| coverage(0, j)).collect();
    let rb = coverage(1, 0);
    let pass = failed == 0 && rw1.iter().all(|c| (0.82..=0.94).contains(c)) && rb < 0.60;
    let list: Vec<String> = rw1.iter().map(|c| format!("{c:.2}")).collect();
    outcome(pass, format!("RW1 coverage [{}], RB coverage for beta=1.00 {rb:.2}", list.join(", ")))
}

fn irrepresentable_classification() -> Outcome {
    let mut got = Vec::new();
    for id in 1..=8u8 {
        let s = SimSetting::table1(id).unwrap();
        let support = SupportSet::new((0..s.q).collect(), s.p).unwrap();
        let signs = vec![1.0; s.q];
        let r = irrepresentable_from_gram(&s.sigma().unwrap(), &support, &signs, IRREPRESENTABLE_SLACK).unwrap();
        got.push(r.satisfied);
    }
    let expected = [true, true, true, true, false, false, true, true];
    let label: Vec<&str> = got.iter().map(|s| if *s { "ok" } else { "violated" }).collect();
    outcome(got == expected, format!("settings 1-8: {}", label.join(" ")))
}

fn tv_machinery() -> Outcome {
    let mut rng = common::rng(SEED + 7);
    let mut worst = 0.0f64;
    let mut identical_zero = true;
    for _ in 0..100 {
        let na = rng.random_range(1..60);
        let nb = rng.random_range(1..60);
        let shift = rng.random_range(-1.0..1.0);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| shift + rng.random_range(-1.0..1.0)).collect();
        let (ea, eb) = (Ecdf::new(a.clone()).unwrap(), Ecdf::new(b.clone()).unwrap());
        let lo = ea.min().min(eb.min()) - TV_STEP;
        let hi = ea.max().max(eb.max()) + TV_STEP;
        let got = tv_distance(&ea, &eb, lo, hi, TV_STEP).unwrap();
        worst = worst.max((got - common::half_l1_exact(&a, &b, lo, hi)).abs());
        identical_zero &= tv_distance(&ea, &Ecdf::new(a).unwrap(), lo, hi, TV_STEP).unwrap() == 0.0;
    }
    outcome(
        worst <= 2.0 * TV_STEP && identical_zero,
        format!("max |tv - exact| {worst:.2e} (bound {:.0e}), identical samples give 0: {identical_zero}", 2.0 * TV_STEP),
    )
}

fn selection_ordering() -> Outcome {
    let res = experiment(2, 50, 500, vec![Method::TwoStep(WeightScheme::ObsOnly), Method::ResidualBootstrap]);
    let mean_p = |m: usize, j: usize| {
        res.iter().map(|r| r.methods[m].report.as_ref().unwrap().select_prob[j]).sum::<f64>() / res.len() as f64
    };
    let (rw7, rb7, rw1, rb1) = (mean_p(0, 6), mean_p(1, 6), mean_p(0, 0), mean_p(1, 0));
    outcome(
        rw7 < rb7 && rw1 > 0.99 && rb1 > 0.99,
        format!("p7: RW1 {rw7:.3} vs RB {rb7:.3}; p1: RW1 {rw1:.4}, RB {rb1:.4}"),
    )
}

fn cv_ordering() -> Outcome {
    let setting = SimSetting::table1(2).unwrap();
    let cfg = ExperimentConfig::default();
    let mut larger = 0;
    for r in 0..100 {
        let (train, _, _) = generate_dataset(&setting, r, SEED).unwrap();
        let grid = default_lambda_grid(&train, cfg.grid_len, cfg.grid_ratio);
        let seed = derive_seed(SEED, Domain::Folds, r as u64);
        let (one, two) = cross_validate_both(&train, cfg.folds, &grid, seed, &cfg.solver).unwrap();
        if two.chosen_lambda > one.chosen_lambda {
            larger += 1;
        }
    }
    outcome(larger >= 70, format!("two-step lambda larger in {larger}/100 replicates"))
}

fn cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_rwlasso"))
        .args(args)
        .env_remove("RW_LASSO_WORKERS")
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let setting = SimSetting::table1(1).unwrap();
    let (train, _, _) = generate_dataset(&setting, 0, SEED).unwrap();
    let csv = dir.path().join("data.csv");
    let mut text = String::new();
    text.push_str(&train.names().join(","));
    text.push_str(",y\n");
    for i in 0..train.n() {
        let row: Vec<String> = train.x().row(i).iter().map(|v| format!("{v}")).collect();
        text.push_str(&format!("{},{}\n", row.join(","), train.y()[i]));
    }
    std::fs::write(&csv, text).unwrap();
    let csv = csv.to_str().unwrap();

    let mut ok = true;
    let mut files = 0;
    for (tag, args) in [
        ("sample", vec!["sample", "--data", csv, "--response", "y", "--lambda", "cv", "--B", "300", "--seed", "9"]),
        ("simulate", vec!["simulate", "--setting", "2", "--T", "6", "--B", "100", "--seed", "9"]),
    ] {
        let mut outs = Vec::new();
        for workers in ["1", "3"] {
            let out = dir.path().join(format!("{tag}-{workers}"));
            let mut full = vec!["--workers", workers];
            full.extend(args.iter().copied());
            full.extend(["--out", out.to_str().unwrap()]);
            ok &= cli(&full);
            outs.push(csv_files(&out));
        }
        files += outs[0].len();
        ok &= !outs[0].is_empty() && outs[0] == outs[1];
    }
    outcome(ok, format!("{files} csv files compared between --workers 1 and --workers 3"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("solver optimality", solver_optimality),
        ("scheme equivalence", scheme_equivalence),
        ("conditional model selection", conditional_selection),
        ("conditional sparse normality", sparse_normality),
        ("coverage reproduction (setting 8)", coverage_reproduction),
        ("irrepresentable classification", irrepresentable_classification),
        ("tv machinery", tv_machinery),
        ("selection-probability ordering", selection_ordering),
        ("cv ordering", cv_ordering),
        ("determinism across workers", determinism),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failures += 1;
        }
        println!("[{status}] {:>2}. {name}: {} ({:.1}s)", k + 1, o.detail, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 && std::env::var("RWLASSO_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
