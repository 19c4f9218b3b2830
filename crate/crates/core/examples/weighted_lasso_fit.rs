//! One weighted LASSO fit under each scheme, with its KKT certificate.

use rwlasso::sim::{generate_dataset, SimSetting};
use rwlasso::solver::{kkt_certificate, solve_lasso, solve_weighted_lasso, SolverConfig};
use rwlasso::weights::{draw_weights, WeightDistribution, WeightScheme};

fn main() -> rwlasso::Result<()> {
    let setting = SimSetting::table1(1)?;
    let (data, truth, _) = generate_dataset(&setting, 0, 11)?;
    let cfg = SolverConfig::default();
    let lambda = 20.0;

    let plain = solve_lasso(&data, lambda, &cfg)?;
    println!("unweighted   beta = {:?}", rounded(&plain.beta));
    println!("truth        beta = {:?}", truth.beta0);

    for scheme in WeightScheme::ALL {
        let w = draw_weights(&WeightDistribution::default(), scheme, data.n(), data.p(), 11, 0)?;
        let fit = solve_weighted_lasso(&data, &w, lambda, &cfg)?;
        let kkt = kkt_certificate(&data, &w, lambda, &fit.beta)?;
        println!(
            "{:<12} beta = {:?}  active = {:?}  kkt = {kkt:.1e}  sweeps = {}",
            scheme.label(),
            rounded(&fit.beta),
            fit.active.indices(),
            fit.iterations
        );
    }
    Ok(())
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}
