//! Random-weight distributions and the three weighting schemes.
//!
//! A [`WeightDraw`] holds one realization of the observation weights
//! `W_1..W_n` (the diagonal of `D_n`) and the penalty weights
//! `W_{0,1}..W_{0,p}`:
//!
//! - [`WeightScheme::ObsOnly`] (RW1): penalty weights fixed at 1.
//! - [`WeightScheme::SharedPenalty`] (RW2): one extra draw `W_0` shared by
//!   every penalty term.
//! - [`WeightScheme::PerPenalty`] (RW3): an independent draw per penalty
//!   term. Selection consistency for this scheme is only established for
//!   exponential weights; other families are allowed but unproven.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

/// Positive weight law with finite fourth moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum WeightDistribution {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    /// Uniform on `[a, b]` with `0 < a <= b`; `a == b` is a point mass.
    Uniform { a: f64, b: f64 },
}

impl Default for WeightDistribution {
    fn default() -> Self {
        WeightDistribution::Exponential { rate: 1.0 }
    }
}

impl WeightDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WeightDistribution::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            WeightDistribution::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
            WeightDistribution::Uniform { a, b } => a > 0.0 && b >= a && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid weight distribution {self}")))
        }
    }

    /// Analytic mean and variance.
    pub fn moments(&self) -> (f64, f64) {
        match *self {
            WeightDistribution::Exponential { rate } => (1.0 / rate, 1.0 / (rate * rate)),
            WeightDistribution::Gamma { shape, rate } => (shape / rate, shape / (rate * rate)),
            WeightDistribution::Uniform { a, b } => ((a + b) / 2.0, (b - a) * (b - a) / 12.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightDistribution::Exponential { rate } => loop {
                let e: f64 = Exp1.sample(rng);
                if e > 0.0 {
                    break e / rate;
                }
            },
            WeightDistribution::Gamma { shape, rate } => {
                let g = Gamma::new(shape, 1.0 / rate).expect("validated gamma parameters");
                loop {
                    let v = g.sample(rng);
                    if v > 0.0 {
                        break v;
                    }
                }
            }
            WeightDistribution::Uniform { a, b } => {
                if a == b {
                    a
                } else {
                    a + (b - a) * rng.random::<f64>()
                }
            }
        }
    }
}

impl fmt::Display for WeightDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            WeightDistribution::Exponential { rate } => write!(f, "exponential:{rate}"),
            WeightDistribution::Gamma { shape, rate } => write!(f, "gamma:{shape},{rate}"),
            WeightDistribution::Uniform { a, b } => write!(f, "uniform:{a},{b}"),
        }
    }
}

/// Accepts the JSON form (`{"family":"exponential","rate":1.0}`) or the
/// short form `exponential:1`, `gamma:2,2`, `uniform:0.5,1.5`.
impl FromStr for WeightDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let dist = if s.starts_with('{') {
            serde_json::from_str(s)
                .map_err(|e| Error::invalid(format!("weight distribution JSON: {e}")))?
        } else {
            let (family, params) = s.split_once(':').unwrap_or((s, ""));
            let nums: Vec<f64> = if params.is_empty() {
                Vec::new()
            } else {
                params
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::invalid(format!("weight distribution '{s}': {e}")))?
            };
            match (family.to_ascii_lowercase().as_str(), nums.as_slice()) {
                ("exponential" | "exp", []) => WeightDistribution::Exponential { rate: 1.0 },
                ("exponential" | "exp", [rate]) => WeightDistribution::Exponential { rate: *rate },
                ("gamma", [shape, rate]) => WeightDistribution::Gamma {
                    shape: *shape,
                    rate: *rate,
                },
                ("uniform", [a, b]) => WeightDistribution::Uniform { a: *a, b: *b },
                _ => return Err(Error::invalid(format!("unknown weight distribution '{s}'"))),
            }
        };
        dist.validate()?;
        Ok(dist)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightScheme {
    #[serde(rename = "rw1")]
    ObsOnly,
    #[serde(rename = "rw2")]
    SharedPenalty,
    #[serde(rename = "rw3")]
    PerPenalty,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 3] = [
        WeightScheme::ObsOnly,
        WeightScheme::SharedPenalty,
        WeightScheme::PerPenalty,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            WeightScheme::ObsOnly => "RW1",
            WeightScheme::SharedPenalty => "RW2",
            WeightScheme::PerPenalty => "RW3",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rw1" | "obs-only" | "obsonly" => Ok(WeightScheme::ObsOnly),
            "rw2" | "shared-penalty" | "sharedpenalty" => Ok(WeightScheme::SharedPenalty),
            "rw3" | "per-penalty" | "perpenalty" => Ok(WeightScheme::PerPenalty),
            _ => Err(Error::invalid(format!(
                "unknown weighting scheme '{s}' (expected rw1, rw2 or rw3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightDraw {
    pub w_obs: Vec<f64>,
    pub w_pen: Vec<f64>,
    pub scheme: WeightScheme,
    pub draw_index: u64,
    pub seed: u64,
}

impl WeightDraw {
    /// All weights equal to one: the unweighted LASSO.
    pub fn unit(n: usize, p: usize) -> Self {
        Self {
            w_obs: vec![1.0; n],
            w_pen: vec![1.0; p],
            scheme: WeightScheme::ObsOnly,
            draw_index: 0,
            seed: 0,
        }
    }
}

/// Draws the weights for draw `draw_index` of a batch seeded by
/// `master_seed`. Observation weights are drawn first, then the penalty
/// weight(s) the scheme calls for.
pub fn draw_weights(
    dist: &WeightDistribution,
    scheme: WeightScheme,
    n: usize,
    p: usize,
    master_seed: u64,
    draw_index: u64,
) -> Result<WeightDraw> {
    draw_weights_in(dist, scheme, n, p, master_seed, draw_index, Domain::Weights)
}

pub(crate) fn draw_weights_in(
    dist: &WeightDistribution,
    scheme: WeightScheme,
    n: usize,
    p: usize,
    master_seed: u64,
    draw_index: u64,
    domain: Domain,
) -> Result<WeightDraw> {
    if n == 0 || p == 0 {
        return Err(Error::invalid("draw_weights: n and p must be positive"));
    }
    dist.validate()?;
    let mut rng = stream(master_seed, domain, draw_index);
    let w_obs: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let w_pen = match scheme {
        WeightScheme::ObsOnly => vec![1.0; p],
        WeightScheme::SharedPenalty => vec![dist.sample(&mut rng); p],
        WeightScheme::PerPenalty => (0..p).map(|_| dist.sample(&mut rng)).collect(),
    };
    Ok(WeightDraw {
        w_obs,
        w_pen,
        scheme,
        draw_index,
        seed: master_seed,
    })
}
