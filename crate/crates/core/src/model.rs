//! Regression data, true-model specifications and support-set bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{center_columns, ColumnMeans, Matrix};

/// Coefficients with magnitude at or below this count as zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;

const CENTERING_TOL: f64 = 1e-10;

/// A centered regression problem `y = X beta + eps`.
///
/// The design is kept twice: row-major for prediction and column-major for
/// the coordinate-descent hot loop.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Matrix,
    x_cols: Vec<f64>,
    y: Vec<f64>,
    names: Vec<String>,
    means: ColumnMeans,
}

impl Dataset {
    /// Centers `x` and `y` and records the removed means.
    pub fn from_raw(x: &Matrix, y: &[f64]) -> Result<Self> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("response contains non-finite values"));
        }
        let (xc, yc, means) = center_columns(x, y)?;
        Ok(Self::assemble(xc, yc, means))
    }

    /// Wraps data that is already centered. The means record is zero.
    pub fn from_centered(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::invalid(format!(
                "{} design rows but {} responses",
                x.rows(),
                y.len()
            )));
        }
        if x.rows() < 2 {
            return Err(Error::invalid("need at least 2 observations"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("response contains non-finite values"));
        }
        let n = x.rows() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        if y_mean.abs() > CENTERING_TOL {
            return Err(Error::invalid(format!("response is not centered (mean {y_mean})")));
        }
        for j in 0..x.cols() {
            let m = (0..x.rows()).map(|i| x[(i, j)]).sum::<f64>() / n;
            if m.abs() > CENTERING_TOL {
                return Err(Error::invalid(format!("column {j} is not centered (mean {m})")));
            }
        }
        let means = ColumnMeans {
            x_means: vec![0.0; x.cols()],
            y_mean: 0.0,
        };
        Ok(Self::assemble(x, y, means))
    }

    fn assemble(x: Matrix, y: Vec<f64>, means: ColumnMeans) -> Self {
        let (n, p) = (x.rows(), x.cols());
        let mut x_cols = vec![0.0; n * p];
        for i in 0..n {
            for (j, v) in x.row(i).iter().enumerate() {
                x_cols[j * n + i] = *v;
            }
        }
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self {
            x,
            x_cols,
            y,
            names,
            means,
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::invalid(format!(
                "{} names for {} predictors",
                names.len(),
                self.p()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Column `j` of the centered design, contiguous.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x_cols[j * n..(j + 1) * n]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn means(&self) -> &ColumnMeans {
        &self.means
    }

    /// Intercept on the original scale for centered-scale slopes.
    pub fn intercept(&self, beta: &[f64]) -> f64 {
        self.means.y_mean - crate::linalg::dot(&self.means.x_means, beta)
    }

    /// Restricts to the given rows and re-centers. The returned means record
    /// refers to the original (uncentered) scale.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let xs = self.x.select_rows(rows);
        let ys: Vec<f64> = rows.iter().map(|&i| self.y[i]).collect();
        let (xc, yc, local) = center_columns(&xs, &ys)?;
        let means = ColumnMeans {
            x_means: local
                .x_means
                .iter()
                .zip(&self.means.x_means)
                .map(|(a, b)| a + b)
                .collect(),
            y_mean: local.y_mean + self.means.y_mean,
        };
        let mut d = Self::assemble(xc, yc, means);
        d.names = self.names.clone();
        Ok(d)
    }

    /// Same design, new centered response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Dataset> {
        if y.len() != self.n() {
            return Err(Error::invalid(format!(
                "response has {} entries, expected {}",
                y.len(),
                self.n()
            )));
        }
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        if !mean.is_finite() || mean.abs() > CENTERING_TOL {
            return Err(Error::invalid("response must be finite and centered"));
        }
        Ok(Dataset {
            x: self.x.clone(),
            x_cols: self.x_cols.clone(),
            y,
            names: self.names.clone(),
            means: self.means.clone(),
        })
    }

    /// `X beta` on the centered scale.
    pub fn predict(&self, beta: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for (j, &b) in beta.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(self.column(j)) {
                *o += b * x;
            }
        }
        out
    }
}

/// Generative truth for simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueModel {
    pub beta0: Vec<f64>,
    pub support: SupportSet,
    /// Error variance.
    pub sigma_eps: f64,
}

impl TrueModel {
    pub fn new(beta0: Vec<f64>, sigma_eps: f64) -> Result<Self> {
        if !(sigma_eps >= 0.0) || !sigma_eps.is_finite() {
            return Err(Error::invalid("error variance must be finite and non-negative"));
        }
        let support = SupportSet::from_beta(&beta0);
        Ok(Self {
            beta0,
            support,
            sigma_eps,
        })
    }

    pub fn q(&self) -> usize {
        self.support.len()
    }

    pub fn signs(&self) -> Vec<f64> {
        self.support.indices().iter().map(|&j| sgn(self.beta0[j])).collect()
    }
}

/// Sorted, duplicate-free set of 0-based column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&j| j >= p) {
            return Err(Error::invalid(format!("index {bad} out of range for p = {p}")));
        }
        Ok(Self(indices))
    }

    pub fn full(p: usize) -> Self {
        Self((0..p).collect())
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Nonzero pattern of `beta` under [`ZERO_THRESHOLD`].
    pub fn from_beta(beta: &[f64]) -> Self {
        Self(
            beta.iter()
                .enumerate()
                .filter(|(_, b)| b.abs() > ZERO_THRESHOLD)
                .map(|(j, _)| j)
                .collect(),
        )
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn complement(&self, p: usize) -> SupportSet {
        SupportSet((0..p).filter(|j| !self.contains(*j)).collect())
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|j| j + 1).collect()
    }
}

pub fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// True iff both vectors have the same sign pattern.
pub fn sign_match(beta_hat: &[f64], beta0: &[f64]) -> Result<bool> {
    if beta_hat.len() != beta0.len() {
        return Err(Error::invalid(format!(
            "sign_match: lengths {} and {}",
            beta_hat.len(),
            beta0.len()
        )));
    }
    Ok(beta_hat.iter().zip(beta0).all(|(a, b)| sgn(*a) == sgn(*b)))
}

/// Blocks `C11 = X1'X1/n` and `C21 = X2'X1/n` of the scaled Gram matrix,
/// where `X1` holds the support columns and `X2` the rest.
pub fn gram_blocks(data: &Dataset, support: &SupportSet) -> Result<(Matrix, Matrix)> {
    if support.is_empty() {
        return Err(Error::invalid("gram_blocks: empty support"));
    }
    if let Some(&j) = support.indices().last() {
        if j >= data.p() {
            return Err(Error::invalid("gram_blocks: support index out of range"));
        }
    }
    let n = data.n() as f64;
    let s = support.indices();
    let rest = support.complement(data.p());
    let mut c11 = Matrix::zeros(s.len(), s.len());
    for (a, &ja) in s.iter().enumerate() {
        for (b, &jb) in s.iter().enumerate().take(a + 1) {
            let v = crate::linalg::dot(data.column(ja), data.column(jb)) / n;
            c11[(a, b)] = v;
            c11[(b, a)] = v;
        }
    }
    let mut c21 = Matrix::zeros(rest.len(), s.len());
    for (a, &ja) in rest.indices().iter().enumerate() {
        for (b, &jb) in s.iter().enumerate() {
            c21[(a, b)] = crate::linalg::dot(data.column(ja), data.column(jb)) / n;
        }
    }
    Ok((c11, c21))
}
