//! Batch metrics: fit error, selection probabilities, percentile intervals,
//! ecdf distances, the strong irrepresentable condition and a KS summary
//! of conditional normality.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{matvec, spd_solve, Cholesky, Matrix};
use crate::model::{gram_blocks, Dataset, SupportSet, TrueModel, ZERO_THRESHOLD};
use crate::sampler::SampleBatch;

/// Grid spacing for ecdf distances.
pub const TV_STEP: f64 = 0.001;

/// Irrepresentable entries must be at most `1 - IRREPRESENTABLE_SLACK`.
pub const IRREPRESENTABLE_SLACK: f64 = 1e-10;

/// Average over draws of the squared residual norm `||y - X beta_b||^2`.
pub fn batch_mse(batch: &SampleBatch, data: &Dataset) -> Result<f64> {
    if batch.p() != data.p() {
        return Err(Error::invalid(format!(
            "batch has p = {}, data has p = {}",
            batch.p(),
            data.p()
        )));
    }
    let total: f64 = (0..batch.len())
        .map(|b| {
            let fitted = data.predict(batch.draw(b));
            data.y().iter().zip(fitted).map(|(y, f)| (y - f).powi(2)).sum::<f64>()
        })
        .sum();
    Ok(total / batch.len() as f64)
}

/// [`batch_mse`] on held-out data.
pub fn batch_mspe(batch: &SampleBatch, test: &Dataset) -> Result<f64> {
    batch_mse(batch, test)
}

/// Fraction of draws in which each coordinate is nonzero.
pub fn selection_probabilities(batch: &SampleBatch) -> Vec<f64> {
    let b = batch.len() as f64;
    (0..batch.p())
        .map(|j| {
            (0..batch.len())
                .filter(|&r| batch.draws[(r, j)].abs() > ZERO_THRESHOLD)
                .count() as f64
                / b
        })
        .collect()
}

/// Sample quantile with linear interpolation between order statistics
/// (position `(n - 1) * prob`, 0-based). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleIntervals {
    pub level: f64,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub width: Vec<f64>,
}

impl CredibleIntervals {
    pub fn covers(&self, beta0: &[f64]) -> Result<Vec<bool>> {
        if beta0.len() != self.low.len() {
            return Err(Error::invalid("coverage: beta0 has the wrong length"));
        }
        Ok(beta0
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(b, (lo, hi))| lo <= b && b <= hi)
            .collect())
    }
}

/// Equal-tailed percentile intervals per coordinate.
pub fn credible_interval(batch: &SampleBatch, level: f64) -> Result<CredibleIntervals> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level must be in (0, 1), got {level}")));
    }
    if batch.len() < 2 {
        return Err(Error::invalid("credible intervals need at least 2 draws"));
    }
    let tail = (1.0 - level) / 2.0;
    let mut low = Vec::with_capacity(batch.p());
    let mut high = Vec::with_capacity(batch.p());
    for j in 0..batch.p() {
        let mut col = batch.coordinate(j);
        col.sort_by(f64::total_cmp);
        low.push(quantile_sorted(&col, tail));
        high.push(quantile_sorted(&col, 1.0 - tail));
    }
    let width = low.iter().zip(&high).map(|(l, h)| h - l).collect();
    Ok(CredibleIntervals {
        level,
        low,
        high,
        width,
    })
}

/// Empirical cdf, right-continuous: `F(t) = #{x <= t} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("ecdf of an empty sample"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("ecdf sample contains non-finite values"));
        }
        points.sort_by(f64::total_cmp);
        Ok(Self { sorted: points })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= t) as f64 / self.sorted.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }
}

/// Half the trapezoid-rule integral of `|F_a - F_b|` over `[lo, hi]` on a
/// grid of spacing `step` (the last cell is shortened to end at `hi`).
///
/// This is an L1 distance between cdfs scaled by one half, which is what the
/// "ecdf TV" figures in the simulation study report; it is not the
/// measure-theoretic total variation.
pub fn tv_distance(a: &Ecdf, b: &Ecdf, lo: f64, hi: f64, step: f64) -> Result<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("tv_distance: step must be positive"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("tv_distance: need finite lo < hi"));
    }
    let cells = ((hi - lo) / step).floor() as usize;
    let (pa, pb) = (a.points(), b.points());
    let (na, nb) = (pa.len() as f64, pb.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut gap = |t: f64| -> f64 {
        while ia < pa.len() && pa[ia] <= t {
            ia += 1;
        }
        while ib < pb.len() && pb[ib] <= t {
            ib += 1;
        }
        (ia as f64 / na - ib as f64 / nb).abs()
    };
    let mut total = 0.0;
    let mut prev_t = lo;
    let mut prev_f = gap(lo);
    for k in 1..=cells {
        let t = lo + k as f64 * step;
        if t > hi {
            break;
        }
        let f = gap(t);
        total += (t - prev_t) * (prev_f + f) / 2.0;
        prev_t = t;
        prev_f = f;
    }
    if prev_t < hi {
        let f = gap(hi);
        total += (hi - prev_t) * (prev_f + f) / 2.0;
    }
    Ok(total / 2.0)
}

/// [`tv_distance`] over the pooled sample range padded by one step.
pub fn tv_distance_auto(a: &Ecdf, b: &Ecdf, step: f64) -> Result<f64> {
    let lo = a.min().min(b.min()) - step;
    let hi = a.max().max(b.max()) + step;
    tv_distance(a, b, lo, hi, step)
}

/// Per-coordinate [`tv_distance_auto`] between two batches.
pub fn batch_tv(batch: &SampleBatch, reference: &SampleBatch, step: f64) -> Result<Vec<f64>> {
    if batch.p() != reference.p() {
        return Err(Error::invalid("tv: batches have different p"));
    }
    (0..batch.p())
        .map(|j| {
            let a = Ecdf::new(batch.coordinate(j))?;
            let b = Ecdf::new(reference.coordinate(j))?;
            tv_distance_auto(&a, &b, step)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrepresentableReport {
    /// `|C21 C11^{-1} sgn(beta0_S)|`, one entry per irrelevant column.
    pub lhs: Vec<f64>,
    pub eta_margin: Vec<f64>,
    pub satisfied: bool,
    /// Smallest margin `1 - lhs_j`.
    pub eta_star: f64,
}

/// Evaluates the strong irrepresentable condition on a Gram-type matrix
/// (a population covariance or `X'X/n`).
pub fn irrepresentable_from_gram(
    gram: &Matrix,
    support: &SupportSet,
    signs: &[f64],
    slack: f64,
) -> Result<IrrepresentableReport> {
    let p = gram.rows();
    if gram.cols() != p {
        return Err(Error::invalid("irrepresentable: Gram matrix must be square"));
    }
    let q = support.len();
    if q == 0 || q >= p {
        return Err(Error::invalid(format!("irrepresentable: need 1 <= q < p, got q = {q}, p = {p}")));
    }
    if signs.len() != q {
        return Err(Error::invalid("irrepresentable: one sign per support index"));
    }
    let s = support.indices();
    let rest = support.complement(p);
    let c11 = gram.select_rows(s).select_cols(s);
    let c21 = gram.select_rows(rest.indices()).select_cols(s);
    let v = spd_solve(&c11, signs)?;
    let lhs: Vec<f64> = matvec(&c21, &v)?.into_iter().map(f64::abs).collect();
    let eta_margin: Vec<f64> = lhs.iter().map(|l| 1.0 - l).collect();
    let eta_star = eta_margin.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(IrrepresentableReport {
        satisfied: lhs.iter().all(|l| *l <= 1.0 - slack),
        lhs,
        eta_margin,
        eta_star,
    })
}

/// Strong irrepresentable condition on the realized design.
pub fn check_irrepresentable(data: &Dataset, truth: &TrueModel) -> Result<IrrepresentableReport> {
    let q = truth.q();
    if q == 0 || q >= data.p() {
        return Err(Error::invalid(format!(
            "irrepresentable: need 1 <= q < p, got q = {q}, p = {}",
            data.p()
        )));
    }
    let (c11, c21) = gram_blocks(data, &truth.support)?;
    let v = spd_solve(&c11, &truth.signs())?;
    let lhs: Vec<f64> = matvec(&c21, &v)?.into_iter().map(f64::abs).collect();
    let eta_margin: Vec<f64> = lhs.iter().map(|l| 1.0 - l).collect();
    let eta_star = eta_margin.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(IrrepresentableReport {
        satisfied: lhs.iter().all(|l| *l <= 1.0 - IRREPRESENTABLE_SLACK),
        lhs,
        eta_margin,
        eta_star,
    })
}

/// One-sample Kolmogorov-Smirnov statistic against `N(0, 1)`.
pub fn ks_standard_normal(sample: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Large-sample KS critical value `sqrt(-ln(alpha/2)/2) / sqrt(m)`.
pub fn ks_critical_value(m: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (m as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMoments {
    pub ks: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    /// Largest per-coordinate KS statistic.
    pub ks_stat: f64,
    pub coordinates: Vec<CoordinateMoments>,
}

/// Whitens `sqrt(n) (beta_S - center_S)` with the Cholesky factor of
/// `target_cov` and compares every coordinate with `N(0, 1)`.
///
/// `n` is the batch's `n_obs`. Centering must be at an estimator of the
/// conditional mean (the unweighted LASSO+LS fit for two-step batches),
/// never at the true coefficients.
pub fn normality_check(
    batch: &SampleBatch,
    center: &[f64],
    support: &SupportSet,
    target_cov: &Matrix,
) -> Result<NormalityReport> {
    let q = support.len();
    if q == 0 {
        return Err(Error::invalid("normality_check: empty support"));
    }
    if center.len() != batch.p() {
        return Err(Error::invalid("normality_check: center has the wrong length"));
    }
    if target_cov.rows() != q || target_cov.cols() != q {
        return Err(Error::invalid("normality_check: target covariance must be q x q"));
    }
    if support.indices()[q - 1] >= batch.p() {
        return Err(Error::invalid("normality_check: support index out of range"));
    }
    let chol = Cholesky::factor(target_cov)?;
    let root_n = (batch.n_obs as f64).sqrt();
    let mut z: Vec<Vec<f64>> = vec![Vec::with_capacity(batch.len()); q];
    for b in 0..batch.len() {
        let draw = batch.draw(b);
        let d: Vec<f64> = support
            .indices()
            .iter()
            .map(|&j| root_n * (draw[j] - center[j]))
            .collect();
        for (k, v) in chol.solve_lower(&d).into_iter().enumerate() {
            z[k].push(v);
        }
    }
    let coordinates: Vec<CoordinateMoments> = z
        .iter()
        .map(|zs| {
            let m = zs.len() as f64;
            let mean = zs.iter().sum::<f64>() / m;
            let variance = zs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
            CoordinateMoments {
                ks: ks_standard_normal(zs),
                mean,
                variance,
            }
        })
        .collect();
    Ok(NormalityReport {
        ks_stat: coordinates.iter().map(|c| c.ks).fold(0.0, f64::max),
        coordinates,
    })
}

#[derive(Debug, Clone, Default)]
pub struct DiagnoseOptions<'a> {
    pub test: Option<&'a Dataset>,
    pub beta0: Option<&'a [f64]>,
    pub reference: Option<&'a SampleBatch>,
    pub level: Option<f64>,
    pub tv_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub mse: f64,
    pub mspe: Option<f64>,
    pub select_prob: Vec<f64>,
    pub level: f64,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub ci_width: Vec<f64>,
    pub covered: Option<Vec<bool>>,
    pub tv_per_var: Option<Vec<f64>>,
}

impl DiagnosticsReport {
    pub fn tv_mean(&self) -> Option<f64> {
        self.tv_per_var
            .as_ref()
            .map(|tv| tv.iter().sum::<f64>() / tv.len() as f64)
    }
}

/// Every per-batch metric at once. Intervals default to the 90% level.
pub fn diagnose(batch: &SampleBatch, data: &Dataset, opts: &DiagnoseOptions<'_>) -> Result<DiagnosticsReport> {
    let level = opts.level.unwrap_or(0.90);
    let ci = credible_interval(batch, level)?;
    let covered = opts.beta0.map(|b| ci.covers(b)).transpose()?;
    let tv_per_var = opts
        .reference
        .map(|r| batch_tv(batch, r, opts.tv_step.unwrap_or(TV_STEP)))
        .transpose()?;
    Ok(DiagnosticsReport {
        mse: batch_mse(batch, data)?,
        mspe: opts.test.map(|t| batch_mspe(batch, t)).transpose()?,
        select_prob: selection_probabilities(batch),
        level,
        ci_low: ci.low,
        ci_high: ci.high,
        ci_width: ci.width,
        covered,
        tv_per_var,
    })
}
