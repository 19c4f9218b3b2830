//! Random-weighting samplers, the residual-bootstrap baseline and
//! cross-validation for λ.
//!
//! Draw `b` of a batch depends only on `(data, λ, distribution, scheme,
//! master_seed, b)`. Draws run on the rayon pool and are collected in
//! index order, so the batch is bit-identical for any worker count.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::model::{Dataset, SupportSet};
use crate::rng::{stream, Domain};
use crate::solver::{weighted_ls_refit, LassoFit, SolverConfig, WeightedProblem};
use crate::weights::{draw_weights_in, WeightDistribution, WeightDraw, WeightScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Procedure {
    OneStep,
    TwoStep,
    ResidualBootstrap,
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Procedure::OneStep => "one-step",
            Procedure::TwoStep => "two-step",
            Procedure::ResidualBootstrap => "residual-bootstrap",
        })
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "one-step" | "onestep" | "lasso" => Ok(Procedure::OneStep),
            "two-step" | "twostep" | "lasso+ls" => Ok(Procedure::TwoStep),
            "residual-bootstrap" | "rb" => Ok(Procedure::ResidualBootstrap),
            _ => Err(Error::invalid(format!(
                "unknown procedure '{s}' (expected one-step, two-step or residual-bootstrap)"
            ))),
        }
    }
}

/// Something that went wrong with a single draw. The draw is still stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DrawIssue {
    /// Coordinate descent ran out of sweeps.
    NotConverged { draw_index: usize, kkt_residual: f64 },
    /// The weighted refit was singular; the draw was redone with a fresh
    /// weight stream.
    RefitRetried { draw_index: usize },
    /// The refit was singular twice; the step-one LASSO solution is stored.
    RefitFailed { draw_index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// `B x p`, one parameter draw per row.
    pub draws: Matrix,
    pub selected: Vec<SupportSet>,
    pub names: Vec<String>,
    pub procedure: Procedure,
    /// `None` for the residual bootstrap.
    pub scheme: Option<WeightScheme>,
    pub dist: Option<WeightDistribution>,
    pub lambda: f64,
    pub master_seed: u64,
    pub kkt_tol: f64,
    /// Sample size of the data the batch was drawn from.
    pub n_obs: usize,
    pub issues: Vec<DrawIssue>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.draws.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.rows() == 0
    }

    pub fn p(&self) -> usize {
        self.draws.cols()
    }

    pub fn draw(&self, b: usize) -> &[f64] {
        self.draws.row(b)
    }

    /// Column `j` across all draws.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.draws.column(j)
    }

    /// Number of distinct draws with at least one recorded issue.
    pub fn flagged_draws(&self) -> usize {
        let mut idx: Vec<usize> = self
            .issues
            .iter()
            .map(|i| match i {
                DrawIssue::NotConverged { draw_index, .. }
                | DrawIssue::RefitRetried { draw_index }
                | DrawIssue::RefitFailed { draw_index } => *draw_index,
            })
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx.len()
    }

    /// Mean of the draws.
    pub fn mean(&self) -> Vec<f64> {
        let b = self.len() as f64;
        (0..self.p())
            .map(|j| self.coordinate(j).iter().sum::<f64>() / b)
            .collect()
    }
}

struct DrawOutcome {
    beta: Vec<f64>,
    selected: SupportSet,
    issues: Vec<DrawIssue>,
}

fn check_common(lambda: f64, b: usize) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if b == 0 {
        return Err(Error::invalid("number of draws B must be at least 1"));
    }
    Ok(())
}

fn not_converged(fit: &LassoFit, b: usize) -> Option<DrawIssue> {
    (!fit.converged).then_some(DrawIssue::NotConverged {
        draw_index: b,
        kkt_residual: fit.kkt_residual,
    })
}

fn assemble(outcomes: Vec<DrawOutcome>, p: usize) -> (Matrix, Vec<SupportSet>, Vec<DrawIssue>) {
    let mut draws = Matrix::zeros(outcomes.len(), p);
    let mut selected = Vec::with_capacity(outcomes.len());
    let mut issues = Vec::new();
    for (b, o) in outcomes.into_iter().enumerate() {
        draws.row_mut(b).copy_from_slice(&o.beta);
        selected.push(o.selected);
        issues.extend(o.issues);
    }
    (draws, selected, issues)
}

/// Draws `B` random-weighting LASSO estimates: each draw re-optimizes the
/// weighted objective under a fresh weight realization.
pub fn one_step_sample(
    data: &Dataset,
    lambda: f64,
    b: usize,
    dist: &WeightDistribution,
    scheme: WeightScheme,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<SampleBatch> {
    check_common(lambda, b)?;
    dist.validate()?;
    cfg.validate()?;
    let (n, p) = (data.n(), data.p());
    let outcomes: Vec<DrawOutcome> = (0..b)
        .into_par_iter()
        .map(|idx| {
            let w = draw_weights_in(dist, scheme, n, p, seed, idx as u64, Domain::Weights)?;
            let fit = WeightedProblem::new(data, &w)?.solve(lambda, cfg, None)?;
            Ok(DrawOutcome {
                issues: not_converged(&fit, idx).into_iter().collect(),
                selected: fit.active,
                beta: fit.beta,
            })
        })
        .collect::<Result<_>>()?;
    let (draws, selected, issues) = assemble(outcomes, p);
    Ok(SampleBatch {
        draws,
        selected,
        names: data.names().to_vec(),
        procedure: Procedure::OneStep,
        scheme: Some(scheme),
        dist: Some(*dist),
        lambda,
        master_seed: seed,
        kkt_tol: cfg.kkt_tol,
        n_obs: n,
        issues,
    })
}

enum TwoStepAttempt {
    Done { fit: LassoFit, beta: Vec<f64> },
    Singular { fit: LassoFit },
}

fn two_step_attempt(
    data: &Dataset,
    w: &WeightDraw,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<TwoStepAttempt> {
    let fit = WeightedProblem::new(data, w)?.solve(lambda, cfg, None)?;
    if fit.active.is_empty() {
        return Ok(TwoStepAttempt::Done {
            beta: vec![0.0; data.p()],
            fit,
        });
    }
    match weighted_ls_refit(data, w, &fit.active) {
        Ok(beta) => Ok(TwoStepAttempt::Done { fit, beta }),
        Err(Error::Singular { .. }) => Ok(TwoStepAttempt::Singular { fit }),
        Err(e) => Err(e),
    }
}

/// Draws `B` random-weighting LASSO+LS estimates: select with the weighted
/// LASSO, then refit by weighted least squares on the selected columns.
/// An empty selection gives the zero vector.
pub fn two_step_sample(
    data: &Dataset,
    lambda: f64,
    b: usize,
    dist: &WeightDistribution,
    scheme: WeightScheme,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<SampleBatch> {
    check_common(lambda, b)?;
    dist.validate()?;
    cfg.validate()?;
    let (n, p) = (data.n(), data.p());
    let outcomes: Vec<DrawOutcome> = (0..b)
        .into_par_iter()
        .map(|idx| {
            let w = draw_weights_in(dist, scheme, n, p, seed, idx as u64, Domain::Weights)?;
            let mut issues = Vec::new();
            let (fit, beta) = match two_step_attempt(data, &w, lambda, cfg)? {
                TwoStepAttempt::Done { fit, beta } => (fit, beta),
                TwoStepAttempt::Singular { .. } => {
                    issues.push(DrawIssue::RefitRetried { draw_index: idx });
                    let w = draw_weights_in(
                        dist,
                        scheme,
                        n,
                        p,
                        seed,
                        idx as u64,
                        Domain::WeightsRetry,
                    )?;
                    match two_step_attempt(data, &w, lambda, cfg)? {
                        TwoStepAttempt::Done { fit, beta } => (fit, beta),
                        TwoStepAttempt::Singular { fit } => {
                            issues.push(DrawIssue::RefitFailed { draw_index: idx });
                            let beta = fit.beta.clone();
                            (fit, beta)
                        }
                    }
                }
            };
            issues.extend(not_converged(&fit, idx));
            Ok(DrawOutcome {
                beta,
                selected: fit.active,
                issues,
            })
        })
        .collect::<Result<_>>()?;
    let (draws, selected, issues) = assemble(outcomes, p);
    Ok(SampleBatch {
        draws,
        selected,
        names: data.names().to_vec(),
        procedure: Procedure::TwoStep,
        scheme: Some(scheme),
        dist: Some(*dist),
        lambda,
        master_seed: seed,
        kkt_tol: cfg.kkt_tol,
        n_obs: n,
        issues,
    })
}

/// Residual bootstrap around the standard LASSO at a fixed `lambda_rb`:
/// fit once, center the residuals, resample them with replacement, rebuild
/// the response and refit at the same λ.
pub fn residual_bootstrap(
    data: &Dataset,
    lambda_rb: f64,
    b: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<SampleBatch> {
    let n = data.n();
    residual_bootstrap_with(data, lambda_rb, b, seed, cfg, &|draw: u64| {
        let mut rng = stream(seed, Domain::Resample, draw);
        (0..n).map(|_| rng.random_range(0..n)).collect()
    })
}

/// [`residual_bootstrap`] with a caller-supplied resampling rule: `resample(b)`
/// returns the `n` residual indices used by draw `b`.
pub fn residual_bootstrap_with(
    data: &Dataset,
    lambda_rb: f64,
    b: usize,
    seed: u64,
    cfg: &SolverConfig,
    resample: &(dyn Fn(u64) -> Vec<usize> + Sync),
) -> Result<SampleBatch> {
    check_common(lambda_rb, b)?;
    cfg.validate()?;
    let (n, p) = (data.n(), data.p());
    let unit = WeightDraw::unit(n, p);
    let base = WeightedProblem::new(data, &unit)?.solve(lambda_rb, cfg, None)?;
    let fitted = data.predict(&base.beta);
    let mut resid: Vec<f64> = data.y().iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let rmean = resid.iter().sum::<f64>() / n as f64;
    resid.iter_mut().for_each(|e| *e -= rmean);

    let outcomes: Vec<DrawOutcome> = (0..b)
        .into_par_iter()
        .map(|idx| {
            let picks = resample(idx as u64);
            if picks.len() != n || picks.iter().any(|&i| i >= n) {
                return Err(Error::invalid("resample rule must return n indices below n"));
            }
            let mut ystar: Vec<f64> = fitted.iter().zip(&picks).map(|(f, &i)| f + resid[i]).collect();
            let m = ystar.iter().sum::<f64>() / n as f64;
            ystar.iter_mut().for_each(|v| *v -= m);
            let boot = data.with_response(ystar)?;
            let fit = WeightedProblem::new(&boot, &unit)?.solve(lambda_rb, cfg, None)?;
            Ok(DrawOutcome {
                issues: not_converged(&fit, idx).into_iter().collect(),
                selected: fit.active,
                beta: fit.beta,
            })
        })
        .collect::<Result<_>>()?;
    let (draws, selected, issues) = assemble(outcomes, p);
    Ok(SampleBatch {
        draws,
        selected,
        names: data.names().to_vec(),
        procedure: Procedure::ResidualBootstrap,
        scheme: None,
        dist: None,
        lambda: lambda_rb,
        master_seed: seed,
        kkt_tol: cfg.kkt_tol,
        n_obs: n,
        issues,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvMode {
    /// Held-out error of the LASSO fit itself.
    OneStepLasso,
    /// Held-out error of LASSO selection followed by an unweighted LS refit.
    TwoStepLassoLs,
}

impl FromStr for CvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "one-step" | "lasso" => Ok(CvMode::OneStepLasso),
            "two-step" | "lasso+ls" => Ok(CvMode::TwoStepLassoLs),
            _ => Err(Error::invalid(format!("unknown cv mode '{s}' (expected one-step or two-step)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mode: CvMode,
    pub lambda_grid: Vec<f64>,
    pub cv_error: Vec<f64>,
    pub chosen_lambda: f64,
    pub folds: usize,
    /// `(fold, grid index)` pairs where the LS refit was singular and the
    /// LASSO prediction was used instead.
    pub fallbacks: Vec<(usize, usize)>,
}

/// `len` log-spaced values from `lambda_max = max_j |2 x_j'y|` down to
/// `ratio * lambda_max`.
pub fn default_lambda_grid(data: &Dataset, len: usize, ratio: f64) -> Vec<f64> {
    let lmax = (0..data.p())
        .map(|j| 2.0 * dot(data.column(j), data.y()).abs())
        .fold(0.0, f64::max);
    let lmax = if lmax > 0.0 { lmax } else { 1.0 };
    if len <= 1 {
        return vec![lmax];
    }
    (0..len)
        .map(|k| lmax * ratio.powf(k as f64 / (len - 1) as f64))
        .collect()
}

/// Seeded fold labels: a shuffled index order dealt round-robin, so fold
/// sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Domain::Folds, 0));
    let mut label = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        label[i] = pos % folds;
    }
    label
}

struct FoldErrors {
    one_step: Vec<f64>,
    two_step: Vec<f64>,
    fallbacks: Vec<usize>,
}

fn fold_errors(
    data: &Dataset,
    train_rows: &[usize],
    test_rows: &[usize],
    grid: &[f64],
    cfg: &SolverConfig,
) -> Result<FoldErrors> {
    let train = data.subset(train_rows)?;
    let unit = WeightDraw::unit(train.n(), train.p());
    let prob = WeightedProblem::new(&train, &unit)?;
    // held-out rows on the original scale
    let xm = &data.means().x_means;
    let test_x: Vec<Vec<f64>> = test_rows
        .iter()
        .map(|&i| data.x().row(i).iter().zip(xm).map(|(a, b)| a + b).collect())
        .collect();
    let test_y: Vec<f64> = test_rows.iter().map(|&i| data.y()[i] + data.means().y_mean).collect();
    let sse = |beta: &[f64]| -> f64 {
        let icpt = train.intercept(beta);
        test_x
            .iter()
            .zip(&test_y)
            .map(|(x, y)| (y - icpt - dot(x, beta)).powi(2))
            .sum()
    };

    let mut out = FoldErrors {
        one_step: Vec::with_capacity(grid.len()),
        two_step: Vec::with_capacity(grid.len()),
        fallbacks: Vec::new(),
    };
    let mut warm: Option<Vec<f64>> = None;
    let mut last_refit: Option<(SupportSet, Vec<f64>)> = None;
    for (k, &lambda) in grid.iter().enumerate() {
        let fit = prob.solve(lambda, cfg, warm.as_deref())?;
        let lasso_err = sse(&fit.beta);
        out.one_step.push(lasso_err);
        let two = if fit.active.is_empty() {
            sse(&fit.beta)
        } else {
            let cached = last_refit.as_ref().filter(|(s, _)| *s == fit.active);
            match cached {
                Some((_, beta)) => sse(beta),
                None => match weighted_ls_refit(&train, &unit, &fit.active) {
                    Ok(beta) => {
                        let e = sse(&beta);
                        last_refit = Some((fit.active.clone(), beta));
                        e
                    }
                    Err(Error::Singular { .. }) => {
                        out.fallbacks.push(k);
                        lasso_err
                    }
                    Err(e) => return Err(e),
                },
            }
        };
        out.two_step.push(two);
        warm = Some(fit.beta);
    }
    Ok(out)
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::invalid("lambda grid must be finite and positive"));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("lambda grid must be strictly descending"));
    }
    Ok(())
}

fn pick(mode: CvMode, grid: &[f64], errors: Vec<f64>, folds: usize, fallbacks: Vec<(usize, usize)>) -> CvResult {
    // grid is descending, so the first minimum is the largest tied λ
    let mut best = 0;
    for (k, e) in errors.iter().enumerate() {
        if *e < errors[best] {
            best = k;
        }
    }
    CvResult {
        mode,
        lambda_grid: grid.to_vec(),
        chosen_lambda: grid[best],
        cv_error: errors,
        folds,
        fallbacks,
    }
}

/// K-fold cross-validation for both modes from a single pass over the folds.
/// Returns `(one-step result, two-step result)`.
pub fn cross_validate_both(
    data: &Dataset,
    folds: usize,
    grid: &[f64],
    seed: u64,
    cfg: &SolverConfig,
) -> Result<(CvResult, CvResult)> {
    if folds < 2 || folds > data.n() {
        return Err(Error::invalid(format!(
            "folds must be between 2 and n = {}, got {folds}",
            data.n()
        )));
    }
    validate_grid(grid)?;
    cfg.validate()?;
    let labels = fold_assignment(data.n(), folds, seed);
    let per_fold: Vec<FoldErrors> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..data.n()).filter(|&i| labels[i] != f).collect();
            let test: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == f).collect();
            fold_errors(data, &train, &test, grid, cfg)
        })
        .collect::<Result<_>>()?;
    let n = data.n() as f64;
    let mut one = vec![0.0; grid.len()];
    let mut two = vec![0.0; grid.len()];
    let mut fallbacks = Vec::new();
    for (f, fe) in per_fold.iter().enumerate() {
        for k in 0..grid.len() {
            one[k] += fe.one_step[k];
            two[k] += fe.two_step[k];
        }
        fallbacks.extend(fe.fallbacks.iter().map(|&k| (f, k)));
    }
    one.iter_mut().chain(two.iter_mut()).for_each(|e| *e /= n);
    Ok((
        pick(CvMode::OneStepLasso, grid, one, folds, Vec::new()),
        pick(CvMode::TwoStepLassoLs, grid, two, folds, fallbacks),
    ))
}

/// K-fold cross-validation of λ on the unweighted LASSO or LASSO+LS fit.
/// The chosen λ minimizes mean held-out squared error, ties going to the
/// larger λ.
pub fn cross_validate(
    data: &Dataset,
    folds: usize,
    grid: &[f64],
    mode: CvMode,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<CvResult> {
    let (one, two) = cross_validate_both(data, folds, grid, seed, cfg)?;
    Ok(match mode {
        CvMode::OneStepLasso => one,
        CvMode::TwoStepLassoLs => two,
    })
}
