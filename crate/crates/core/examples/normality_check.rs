//! Whitened two-step draws on the true support against N(0, 1).

use rwlasso::diagnostics::{ks_critical_value, normality_check};
use rwlasso::linalg::Matrix;
use rwlasso::model::SupportSet;
use rwlasso::sampler::two_step_sample;
use rwlasso::sim::{orthogonal_dataset, orthogonal_design, ErrorLaw};
use rwlasso::solver::{solve_lasso, weighted_ls_refit, SolverConfig};
use rwlasso::weights::{WeightDistribution, WeightDraw, WeightScheme};

fn main() -> rwlasso::Result<()> {
    let (n, p, b) = (2000, 10, 2000);
    let beta0 = [3.0, -2.0, 2.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let x = orthogonal_design(n, p, 4)?;
    let data = orthogonal_dataset(&x, &beta0, ErrorLaw::StdNormal, 4, 0)?;
    let cfg = SolverConfig::default();
    let lambda = 500.0;

    let lasso = solve_lasso(&data, lambda, &cfg)?;
    let center = weighted_ls_refit(&data, &WeightDraw::unit(n, p), &lasso.active)?;
    let rss: f64 = data.y().iter().zip(data.predict(&center)).map(|(y, f)| (y - f).powi(2)).sum();
    let sigma2 = rss / (n - lasso.active.len()) as f64;

    let support = SupportSet::from_beta(&beta0);
    let mut cov = Matrix::zeros(support.len(), support.len());
    for k in 0..support.len() {
        cov[(k, k)] = sigma2;
    }
    let batch = two_step_sample(&data, lambda, b, &WeightDistribution::default(), WeightScheme::ObsOnly, 4, &cfg)?;
    let rep = normality_check(&batch, &center, &support, &cov)?;
    println!("critical value at 0.01: {:.4}", ks_critical_value(b, 0.01));
    for (j, c) in support.indices().iter().zip(&rep.coordinates) {
        println!("x{:<3} ks {:.4}  mean {:>7.4}  var {:.4}", j + 1, c.ks, c.mean, c.variance);
    }
    Ok(())
}
