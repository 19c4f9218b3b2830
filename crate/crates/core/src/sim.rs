//! Simulation settings, data generation and the replicate loop.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{check_irrepresentable, diagnose, DiagnoseOptions, DiagnosticsReport, IrrepresentableReport};
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::model::{Dataset, TrueModel};
use crate::rng::{derive_seed, stream, Domain};
use crate::sampler::{
    cross_validate_both, default_lambda_grid, one_step_sample, residual_bootstrap, two_step_sample, SampleBatch,
};
use crate::solver::SolverConfig;
use crate::weights::{WeightDistribution, WeightScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorLaw {
    StdNormal,
    /// `chi^2_2 - 2`: mean 0, variance 4.
    CenteredChiSq2,
    /// Noise-free responses.
    Zero,
}

impl ErrorLaw {
    pub fn variance(&self) -> f64 {
        match self {
            ErrorLaw::StdNormal => 1.0,
            ErrorLaw::CenteredChiSq2 => 4.0,
            ErrorLaw::Zero => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ErrorLaw::StdNormal => rng.sample(StandardNormal),
            ErrorLaw::CenteredChiSq2 => {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                a * a + b * b - 2.0
            }
            ErrorLaw::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovKind {
    Sigma1,
    Sigma2,
    Sigma3,
    Custom(Matrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetting {
    /// Table number 1..=8 for the named settings.
    pub id: Option<u8>,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub error_law: ErrorLaw,
    pub cov: CovKind,
    pub replicates: usize,
    pub draws: usize,
}

impl SimSetting {
    /// Named settings 1..=8 with `T = 500`, `B = 1000`.
    pub fn table1(id: u8) -> Result<Self> {
        let (n, p, error_law, cov) = match id {
            1 => (100, 10, ErrorLaw::StdNormal, CovKind::Sigma1),
            2 => (500, 10, ErrorLaw::StdNormal, CovKind::Sigma1),
            3 => (100, 10, ErrorLaw::CenteredChiSq2, CovKind::Sigma1),
            4 => (500, 10, ErrorLaw::CenteredChiSq2, CovKind::Sigma1),
            5 => (100, 10, ErrorLaw::StdNormal, CovKind::Sigma2),
            6 => (500, 10, ErrorLaw::StdNormal, CovKind::Sigma2),
            7 => (100, 50, ErrorLaw::StdNormal, CovKind::Sigma3),
            8 => (500, 50, ErrorLaw::StdNormal, CovKind::Sigma3),
            _ => return Err(Error::invalid(format!("setting must be 1..=8, got {id}"))),
        };
        Ok(Self {
            id: Some(id),
            n,
            p,
            q: 6,
            error_law,
            cov,
            replicates: 500,
            draws: 1000,
        })
    }

    pub fn with_scale(mut self, replicates: usize, draws: usize) -> Self {
        self.replicates = replicates;
        self.draws = draws;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q <= self.p && self.p <= self.n) {
            return Err(Error::invalid(format!(
                "need q <= p <= n, got q = {}, p = {}, n = {}",
                self.q, self.p, self.n
            )));
        }
        if self.n < 2 {
            return Err(Error::invalid("need n >= 2"));
        }
        if self.replicates == 0 || self.draws == 0 {
            return Err(Error::invalid("replicates and draws must be at least 1"));
        }
        Cholesky::factor(&self.sigma()?).map(|_| ())
    }

    pub fn sigma(&self) -> Result<Matrix> {
        build_sigma(&self.cov, self.p, self.q)
    }

    pub fn beta0(&self) -> Result<Vec<f64>> {
        build_beta0(self.p, self.q)
    }

    pub fn label(&self) -> String {
        match self.id {
            Some(id) => format!("setting-{id}"),
            None => format!("custom-n{}-p{}-q{}", self.n, self.p, self.q),
        }
    }
}

/// `beta0_j = 3/4 + j/4` for `j = 1..=q`, zero afterwards.
pub fn build_beta0(p: usize, q: usize) -> Result<Vec<f64>> {
    if q > p {
        return Err(Error::invalid(format!("q = {q} exceeds p = {p}")));
    }
    Ok((1..=p)
        .map(|j| if j <= q { 0.75 + 0.25 * j as f64 } else { 0.0 })
        .collect())
}

pub fn build_sigma(kind: &CovKind, p: usize, q: usize) -> Result<Matrix> {
    if q > p {
        return Err(Error::invalid(format!("q = {q} exceeds p = {p}")));
    }
    let need = |want: usize| -> Result<()> {
        if p != want {
            return Err(Error::invalid(format!("{kind:?} requires p = {want}, got {p}")));
        }
        Ok(())
    };
    let entry: Box<dyn Fn(usize, usize) -> f64> = match kind {
        CovKind::Sigma1 | CovKind::Sigma3 => {
            need(if matches!(kind, CovKind::Sigma1) { 10 } else { 50 })?;
            Box::new(move |i, j| {
                if i < q && j < q {
                    0.3f64.powi((i as i32 - j as i32).abs())
                } else {
                    0.0
                }
            })
        }
        CovKind::Sigma2 => {
            need(10)?;
            Box::new(move |i, j| if i < q && j < q { 0.4 } else { 0.5 })
        }
        CovKind::Custom(m) => {
            if m.rows() != p || m.cols() != p {
                return Err(Error::invalid(format!("custom covariance must be {p} x {p}")));
            }
            if !m.is_symmetric(1e-12) {
                return Err(Error::invalid("custom covariance is not symmetric"));
            }
            Cholesky::factor(m)?;
            return Ok(m.clone());
        }
    };
    let mut s = Matrix::identity(p);
    for i in 0..p {
        for j in 0..p {
            if i != j {
                s[(i, j)] = entry(i, j);
            }
        }
    }
    Ok(s)
}

/// `n` rows of `N_p(0, sigma)` followed by `y = X beta0 + eps`.
pub fn draw_raw<R: Rng + ?Sized>(
    rng: &mut R,
    chol: &Cholesky,
    beta0: &[f64],
    law: ErrorLaw,
    n: usize,
) -> (Matrix, Vec<f64>) {
    let p = beta0.len();
    let l = chol.lower();
    let mut x = Matrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    let mut z = vec![0.0; p];
    for i in 0..n {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let row = x.row_mut(i);
        for a in 0..p {
            row[a] = (0..=a).map(|b| l[(a, b)] * z[b]).sum();
        }
        y.push(dot(row, beta0) + law.sample(rng));
    }
    (x, y)
}

/// Training data, truth and an independent test set of the same size.
/// Replicate `r` uses its own random stream, so results never depend on
/// execution order. Each set is centered with its own means.
pub fn generate_dataset(setting: &SimSetting, replicate: usize, master_seed: u64) -> Result<(Dataset, TrueModel, Dataset)> {
    setting.validate()?;
    let beta0 = setting.beta0()?;
    let chol = Cholesky::factor(&setting.sigma()?)?;
    let mut rng = stream(master_seed, Domain::SimData, replicate as u64);
    let (x, y) = draw_raw(&mut rng, &chol, &beta0, setting.error_law, setting.n);
    let (xt, yt) = draw_raw(&mut rng, &chol, &beta0, setting.error_law, setting.n);
    Ok((
        Dataset::from_raw(&x, &y)?,
        TrueModel::new(beta0, setting.error_law.variance())?,
        Dataset::from_raw(&xt, &yt)?,
    ))
}

/// Centered `n x p` design with orthogonal columns of squared norm `n`,
/// so `X'X / n = I`.
pub fn orthogonal_design(n: usize, p: usize, seed: u64) -> Result<Matrix> {
    if p + 1 > n {
        return Err(Error::invalid(format!("orthogonal design needs n > p, got n = {n}, p = {p}")));
    }
    let mut rng = stream(seed, Domain::SimData, u64::MAX);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    while cols.len() < p {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= m);
        // two Gram-Schmidt passes
        for _ in 0..2 {
            for c in &cols {
                let proj = dot(&v, c) / n as f64;
                v.iter_mut().zip(c).for_each(|(x, ci)| *x -= proj * ci);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-8 {
            continue;
        }
        let s = (n as f64).sqrt() / norm;
        v.iter_mut().for_each(|x| *x *= s);
        cols.push(v);
    }
    let mut x = Matrix::zeros(n, p);
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    Ok(x)
}

/// Responses `X beta0 + eps` on a fixed design; `index` selects the stream.
pub fn orthogonal_dataset(
    x: &Matrix,
    beta0: &[f64],
    law: ErrorLaw,
    seed: u64,
    index: u64,
) -> Result<Dataset> {
    if beta0.len() != x.cols() {
        return Err(Error::invalid("beta0 length must equal the number of columns"));
    }
    let mut rng = stream(seed, Domain::SimData, index);
    let y: Vec<f64> = (0..x.rows())
        .map(|i| dot(x.row(i), beta0) + law.sample(&mut rng))
        .collect();
    Dataset::from_raw(x, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TwoStep(WeightScheme),
    OneStep(WeightScheme),
    ResidualBootstrap,
}

impl Method {
    pub const DEFAULT: [Method; 4] = [
        Method::TwoStep(WeightScheme::ObsOnly),
        Method::TwoStep(WeightScheme::SharedPenalty),
        Method::TwoStep(WeightScheme::PerPenalty),
        Method::ResidualBootstrap,
    ];

    fn code(&self) -> u64 {
        let s = |w: &WeightScheme| match w {
            WeightScheme::ObsOnly => 1,
            WeightScheme::SharedPenalty => 2,
            WeightScheme::PerPenalty => 3,
        };
        match self {
            Method::TwoStep(w) => s(w),
            Method::OneStep(w) => 10 + s(w),
            Method::ResidualBootstrap => 20,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::TwoStep(w) => write!(f, "{}-two-step", w.label()),
            Method::OneStep(w) => write!(f, "{}-one-step", w.label()),
            Method::ResidualBootstrap => f.write_str("RB"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "rb" || lower == "residual-bootstrap" {
            return Ok(Method::ResidualBootstrap);
        }
        let (scheme, kind) = lower.split_once('-').unwrap_or((lower.as_str(), "two-step"));
        let scheme: WeightScheme = scheme.parse()?;
        match kind {
            "two-step" => Ok(Method::TwoStep(scheme)),
            "one-step" => Ok(Method::OneStep(scheme)),
            _ => Err(Error::invalid(format!(
                "unknown method '{s}' (expected e.g. rw1-two-step, rw2-one-step or rb)"
            ))),
        }
    }
}

/// Source of the reference batch for ecdf distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpec {
    pub method: Method,
    pub draws: usize,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            method: Method::TwoStep(WeightScheme::ObsOnly),
            draws: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub dist: WeightDistribution,
    pub folds: usize,
    pub grid_len: usize,
    pub grid_ratio: f64,
    pub level: f64,
    pub solver: SolverConfig,
    pub reference: Option<ReferenceSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: Method::DEFAULT.to_vec(),
            dist: WeightDistribution::default(),
            folds: 5,
            grid_len: 100,
            grid_ratio: 1e-3,
            level: 0.90,
            solver: SolverConfig::default(),
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub lambda: f64,
    pub seed: u64,
    pub report: Option<DiagnosticsReport>,
    pub error: Option<String>,
    /// Number of draws with a recorded issue.
    pub flagged_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSeeds {
    /// Data come from stream `replicate` of the master seed.
    pub master: u64,
    pub cv: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seeds: ReplicateSeeds,
    pub lambda_two_step: f64,
    pub lambda_one_step: f64,
    /// Realized-design condition; `None` when `q = 0` or `q = p`.
    pub irrepresentable: Option<IrrepresentableReport>,
    pub methods: Vec<MethodResult>,
}

pub fn method_seed(master_seed: u64, replicate: usize, method: Method) -> u64 {
    derive_seed(derive_seed(master_seed, Domain::Method, replicate as u64), Domain::Method, method.code())
}

/// Runs one method on one dataset.
pub fn run_method(
    method: Method,
    data: &Dataset,
    lambda: f64,
    b: usize,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<SampleBatch> {
    match method {
        Method::TwoStep(w) => two_step_sample(data, lambda, b, &cfg.dist, w, seed, &cfg.solver),
        Method::OneStep(w) => one_step_sample(data, lambda, b, &cfg.dist, w, seed, &cfg.solver),
        Method::ResidualBootstrap => residual_bootstrap(data, lambda, b, seed, &cfg.solver),
    }
}

/// Generates replicate `r`, chooses both λ's by cross-validation, runs every
/// method and summarizes it. Random-weighting methods use the two-step CV
/// λ, the residual bootstrap the one-step CV λ.
pub fn run_replicate(setting: &SimSetting, cfg: &ExperimentConfig, master_seed: u64, r: usize) -> Result<ReplicateResult> {
    let seeds = ReplicateSeeds {
        master: master_seed,
        cv: derive_seed(master_seed, Domain::Folds, r as u64),
    };
    let (train, truth, test) = generate_dataset(setting, r, master_seed)?;
    let grid = default_lambda_grid(&train, cfg.grid_len, cfg.grid_ratio);
    let (one, two) = cross_validate_both(&train, cfg.folds, &grid, seeds.cv, &cfg.solver)?;
    let irrepresentable = (truth.q() > 0 && truth.q() < train.p())
        .then(|| check_irrepresentable(&train, &truth))
        .transpose()?;

    let reference = match &cfg.reference {
        Some(spec) => {
            let lambda = match spec.method {
                Method::ResidualBootstrap => one.chosen_lambda,
                _ => two.chosen_lambda,
            };
            let seed = derive_seed(derive_seed(master_seed, Domain::Method, r as u64), Domain::Method, 30);
            Some(run_method(spec.method, &train, lambda, spec.draws, seed, cfg)?)
        }
        None => None,
    };

    let methods = cfg
        .methods
        .iter()
        .map(|&method| {
            let lambda = match method {
                Method::ResidualBootstrap => one.chosen_lambda,
                _ => two.chosen_lambda,
            };
            let seed = method_seed(master_seed, r, method);
            let outcome = run_method(method, &train, lambda, setting.draws, seed, cfg).and_then(|batch| {
                let opts = DiagnoseOptions {
                    test: Some(&test),
                    beta0: Some(&truth.beta0),
                    reference: reference.as_ref(),
                    level: Some(cfg.level),
                    tv_step: None,
                };
                let flagged = batch.flagged_draws();
                diagnose(&batch, &train, &opts).map(|rep| (rep, flagged))
            });
            match outcome {
                Ok((report, flagged_draws)) => MethodResult {
                    method,
                    lambda,
                    seed,
                    report: Some(report),
                    error: None,
                    flagged_draws,
                },
                Err(e) => MethodResult {
                    method,
                    lambda,
                    seed,
                    report: None,
                    error: Some(e.to_string()),
                    flagged_draws: 0,
                },
            }
        })
        .collect();

    Ok(ReplicateResult {
        replicate: r,
        seeds,
        lambda_two_step: two.chosen_lambda,
        lambda_one_step: one.chosen_lambda,
        irrepresentable,
        methods,
    })
}

/// All `setting.replicates` replicates, in parallel, returned in index order.
pub fn run_experiment(setting: &SimSetting, cfg: &ExperimentConfig, master_seed: u64) -> Result<Vec<ReplicateResult>> {
    setting.validate()?;
    cfg.solver.validate()?;
    cfg.dist.validate()?;
    if cfg.methods.is_empty() {
        return Err(Error::invalid("at least one method is required"));
    }
    (0..setting.replicates)
        .into_par_iter()
        .map(|r| run_replicate(setting, cfg, master_seed, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta0_sequence() {
        assert_eq!(
            build_beta0(10, 6).unwrap(),
            vec![1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(build_beta0(4, 0).unwrap(), vec![0.0; 4]);
        assert_eq!(build_beta0(1, 1).unwrap(), vec![1.0]);
        assert!(build_beta0(2, 3).is_err());
    }

    #[test]
    fn named_covariances() {
        let s1 = build_sigma(&CovKind::Sigma1, 10, 6).unwrap();
        assert_eq!(s1[(0, 1)], 0.3);
        assert_eq!(s1[(0, 6)], 0.0);
        assert_eq!(s1[(7, 8)], 0.0);
        let s2 = build_sigma(&CovKind::Sigma2, 10, 6).unwrap();
        assert_eq!((s2[(0, 1)], s2[(0, 6)], s2[(7, 8)], s2[(3, 3)]), (0.4, 0.5, 0.5, 1.0));
        let s3 = build_sigma(&CovKind::Sigma3, 50, 6).unwrap();
        assert!((s3[(1, 3)] - 0.09).abs() < 1e-15);
        assert!(s3.is_symmetric(0.0));
        assert!(build_sigma(&CovKind::Sigma1, 50, 6).is_err());
        assert!(build_sigma(&CovKind::Sigma3, 10, 6).is_err());
    }

    #[test]
    fn noise_free_responses() {
        let mut s = SimSetting::table1(1).unwrap();
        s.error_law = ErrorLaw::Zero;
        let (train, truth, _) = generate_dataset(&s, 0, 3).unwrap();
        let fitted = train.predict(&truth.beta0);
        for (y, f) in train.y().iter().zip(fitted) {
            assert!((y - f).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_design_gram() {
        let x = orthogonal_design(50, 5, 1).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let g = dot(&x.column(a), &x.column(b)) / 50.0;
                assert!((g - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
            assert!(x.column(a).iter().sum::<f64>().abs() < 1e-10);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            Method::TwoStep(WeightScheme::PerPenalty),
            Method::OneStep(WeightScheme::ObsOnly),
            Method::ResidualBootstrap,
        ] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert_eq!("rw2".parse::<Method>().unwrap(), Method::TwoStep(WeightScheme::SharedPenalty));
        assert!("rw4-two-step".parse::<Method>().is_err());
    }
}
