//! Weighted LASSO by cyclic coordinate descent.
//!
//! The objective is
//!
//! ```text
//!   sum_i W_i (y_i - x_i' beta)^2  +  lambda * sum_j W0_j |beta_j|
//! ```
//!
//! with **no factor of 1/2** on the loss. Stationarity reads
//! `2 x_j' D (y - X beta) = lambda W0_j sgn(beta_j)`, so the soft-threshold
//! level in each coordinate update is `lambda * W0_j / 2`. A `lambda` taken
//! from a toolkit that minimizes `(1/2n)||y - X beta||^2 + alpha ||beta||_1`
//! corresponds to `lambda = 2 n alpha` here.
//!
//! Convergence is declared on the KKT residual (see [`kkt_certificate`]),
//! not on coefficient movement.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::model::{Dataset, SupportSet};
use crate::weights::WeightDraw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordinateOrder {
    Cyclic,
    /// A fresh random permutation every sweep.
    Randomized { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kkt_tol: f64,
    pub max_sweeps: usize,
    pub coordinate_order: CoordinateOrder,
    /// Record the objective after every sweep in [`LassoFit::objective_trace`].
    #[serde(default)]
    pub trace_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-8,
            max_sweeps: 100_000,
            coordinate_order: CoordinateOrder::Cyclic,
            trace_objective: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tol > 0.0) || self.max_sweeps == 0 {
            return Err(Error::invalid("solver needs kkt_tol > 0 and max_sweeps >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub active: SupportSet,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

/// A dataset paired with one weight draw. Holds the λ-independent pieces
/// (weighted columns and their weighted squared norms) so that a path of λ
/// values can be solved without recomputing them.
pub struct WeightedProblem<'a> {
    data: &'a Dataset,
    w_obs: &'a [f64],
    w_pen: &'a [f64],
    /// Column-major `W_i x_ij`.
    wx: Vec<f64>,
    norms: Vec<f64>,
}

impl<'a> WeightedProblem<'a> {
    pub fn new(data: &'a Dataset, w: &'a WeightDraw) -> Result<Self> {
        let (n, p) = (data.n(), data.p());
        if w.w_obs.len() != n || w.w_pen.len() != p {
            return Err(Error::invalid(format!(
                "weights have shape ({}, {}) but data is n = {n}, p = {p}",
                w.w_obs.len(),
                w.w_pen.len()
            )));
        }
        if w.w_obs.iter().chain(&w.w_pen).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("weights must be finite and strictly positive"));
        }
        let mut wx = vec![0.0; n * p];
        let mut norms = vec![0.0; p];
        for j in 0..p {
            let col = data.column(j);
            let out = &mut wx[j * n..(j + 1) * n];
            for ((o, x), wi) in out.iter_mut().zip(col).zip(&w.w_obs) {
                *o = wi * x;
            }
            norms[j] = dot(out, col);
        }
        Ok(Self {
            data,
            w_obs: &w.w_obs,
            w_pen: &w.w_pen,
            wx,
            norms,
        })
    }

    fn wcol(&self, j: usize) -> &[f64] {
        let n = self.data.n();
        &self.wx[j * n..(j + 1) * n]
    }

    /// Smallest λ for which the zero vector is optimal.
    pub fn lambda_max(&self) -> f64 {
        (0..self.data.p())
            .map(|j| 2.0 * dot(self.wcol(j), self.data.y()).abs() / self.w_pen[j])
            .fold(0.0, f64::max)
    }

    fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let fitted = self.data.predict(beta);
        self.data.y().iter().zip(fitted).map(|(y, f)| y - f).collect()
    }

    fn objective(&self, beta: &[f64], r: &[f64], lambda: f64) -> f64 {
        let loss: f64 = self.w_obs.iter().zip(r).map(|(w, ri)| w * ri * ri).sum();
        let pen: f64 = beta.iter().zip(self.w_pen).map(|(b, w)| w * b.abs()).sum();
        loss + lambda * pen
    }

    fn kkt_violation(&self, j: usize, beta_j: f64, r: &[f64], lambda: f64) -> f64 {
        let g = 2.0 * dot(self.wcol(j), r);
        let level = lambda * self.w_pen[j];
        if beta_j != 0.0 {
            (g - level * beta_j.signum()).abs()
        } else {
            (g.abs() - level).max(0.0)
        }
    }

    fn kkt(&self, beta: &[f64], r: &[f64], lambda: f64, coords: impl Iterator<Item = usize>) -> f64 {
        let n = self.data.n() as f64;
        coords
            .map(|j| self.kkt_violation(j, beta[j], r, lambda))
            .fold(0.0, f64::max)
            / n
    }

    /// One coordinate update; keeps `r = y - X beta` current.
    #[inline]
    fn update(&self, j: usize, beta: &mut [f64], r: &mut [f64], lambda: f64) {
        let c = self.norms[j];
        let old = beta[j];
        let new = if c > 0.0 {
            let z = dot(self.wcol(j), r) + c * old;
            soft_threshold(z, lambda * self.w_pen[j] / 2.0) / c
        } else {
            0.0
        };
        if new != old {
            let delta = new - old;
            for (ri, x) in r.iter_mut().zip(self.data.column(j)) {
                *ri -= delta * x;
            }
            beta[j] = new;
        }
    }

    pub fn solve(&self, lambda: f64, cfg: &SolverConfig, warm: Option<&[f64]>) -> Result<LassoFit> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        cfg.validate()?;
        let p = self.data.p();
        let mut beta = match warm {
            Some(b) if b.len() == p => b.to_vec(),
            Some(b) => {
                return Err(Error::invalid(format!(
                    "warm start has {} entries, expected {p}",
                    b.len()
                )))
            }
            None => vec![0.0; p],
        };
        let mut r = self.residual(&beta);
        let mut order: Vec<usize> = (0..p).collect();
        let mut order_rng = match cfg.coordinate_order {
            CoordinateOrder::Randomized { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            CoordinateOrder::Cyclic => None,
        };
        let mut trace = Vec::new();
        if cfg.trace_objective {
            trace.push(self.objective(&beta, &r, lambda));
        }

        let mut sweeps = 0;
        let mut converged = false;
        let mut kkt_value = f64::INFINITY;
        let mut active: Vec<usize> = Vec::new();
        while sweeps < cfg.max_sweeps {
            if let Some(rng) = order_rng.as_mut() {
                order.shuffle(rng);
            }
            for &j in &order {
                self.update(j, &mut beta, &mut r, lambda);
            }
            sweeps += 1;
            if cfg.trace_objective {
                trace.push(self.objective(&beta, &r, lambda));
            }
            kkt_value = self.kkt(&beta, &r, lambda, 0..p);
            if kkt_value <= cfg.kkt_tol {
                r = self.residual(&beta);
                kkt_value = self.kkt(&beta, &r, lambda, 0..p);
                if kkt_value <= cfg.kkt_tol {
                    converged = true;
                    break;
                }
            }

            // Iterate on the current nonzero set before the next full sweep.
            active.clear();
            active.extend((0..p).filter(|&j| beta[j] != 0.0));
            while sweeps < cfg.max_sweeps && !active.is_empty() {
                if let Some(rng) = order_rng.as_mut() {
                    active.shuffle(rng);
                }
                for &j in &active {
                    self.update(j, &mut beta, &mut r, lambda);
                }
                sweeps += 1;
                if cfg.trace_objective {
                    trace.push(self.objective(&beta, &r, lambda));
                }
                if self.kkt(&beta, &r, lambda, active.iter().copied()) <= 0.25 * cfg.kkt_tol {
                    break;
                }
            }
        }
        if !converged {
            r = self.residual(&beta);
            kkt_value = self.kkt(&beta, &r, lambda, 0..p);
            converged = kkt_value <= cfg.kkt_tol;
        }
        Ok(LassoFit {
            active: SupportSet::from_beta(&beta),
            beta,
            lambda,
            kkt_residual: kkt_value,
            iterations: sweeps,
            converged,
            objective_trace: trace,
        })
    }
}

pub fn soft_threshold(z: f64, level: f64) -> f64 {
    if z > level {
        z - level
    } else if z < -level {
        z + level
    } else {
        0.0
    }
}

/// Minimizes the weighted LASSO objective from a zero start.
pub fn solve_weighted_lasso(
    data: &Dataset,
    w: &WeightDraw,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<LassoFit> {
    WeightedProblem::new(data, w)?.solve(lambda, cfg, None)
}

/// The standard (unweighted) LASSO.
pub fn solve_lasso(data: &Dataset, lambda: f64, cfg: &SolverConfig) -> Result<LassoFit> {
    let w = WeightDraw::unit(data.n(), data.p());
    solve_weighted_lasso(data, &w, lambda, cfg)
}

/// Scaled maximum violation of the weighted LASSO optimality conditions:
/// for `beta_j != 0`, `|2 x_j'D r - lambda W0_j sgn(beta_j)|`; otherwise
/// `max(0, |2 x_j'D r| - lambda W0_j)`; all divided by `n`.
pub fn kkt_certificate(data: &Dataset, w: &WeightDraw, lambda: f64, beta: &[f64]) -> Result<f64> {
    if beta.len() != data.p() {
        return Err(Error::invalid(format!(
            "beta has {} entries, expected {}",
            beta.len(),
            data.p()
        )));
    }
    let prob = WeightedProblem::new(data, w)?;
    let r = prob.residual(beta);
    Ok(prob.kkt(beta, &r, lambda, 0..data.p()))
}

/// Weighted least squares on the support columns, zeros elsewhere:
/// `(X_S' D X_S)^{-1} X_S' D y`.
pub fn weighted_ls_refit(data: &Dataset, w: &WeightDraw, support: &SupportSet) -> Result<Vec<f64>> {
    if support.is_empty() {
        return Err(Error::invalid("weighted_ls_refit: empty support"));
    }
    if w.w_obs.len() != data.n() {
        return Err(Error::invalid("weighted_ls_refit: weight length mismatch"));
    }
    let s = support.indices();
    if s[s.len() - 1] >= data.p() {
        return Err(Error::invalid("weighted_ls_refit: support index out of range"));
    }
    let k = s.len();
    let mut wcols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for &j in s {
        wcols.push(data.column(j).iter().zip(&w.w_obs).map(|(x, wi)| x * wi).collect());
    }
    let mut gram = Matrix::zeros(k, k);
    let mut rhs = vec![0.0; k];
    for a in 0..k {
        rhs[a] = dot(&wcols[a], data.y());
        for b in 0..=a {
            let v = dot(&wcols[a], data.column(s[b]));
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let coef = Cholesky::factor(&gram)?.solve(&rhs);
    let mut beta = vec![0.0; data.p()];
    for (&j, c) in s.iter().zip(coef) {
        beta[j] = c;
    }
    Ok(beta)
}
