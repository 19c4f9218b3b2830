//! Residual bootstrap baseline next to two-step RW1 on a correlated design.

use rwlasso::diagnostics::credible_interval;
use rwlasso::sampler::{residual_bootstrap, two_step_sample};
use rwlasso::sim::{generate_dataset, SimSetting};
use rwlasso::solver::SolverConfig;
use rwlasso::weights::{WeightDistribution, WeightScheme};

fn main() -> rwlasso::Result<()> {
    let (data, truth, _) = generate_dataset(&SimSetting::table1(8)?, 0, 17)?;
    let cfg = SolverConfig::default();
    let lambda = 60.0;

    let rb = residual_bootstrap(&data, lambda, 500, 17, &cfg)?;
    let rw = two_step_sample(&data, lambda, 500, &WeightDistribution::default(), WeightScheme::ObsOnly, 17, &cfg)?;
    let (ci_rb, ci_rw) = (credible_interval(&rb, 0.9)?, credible_interval(&rw, 0.9)?);

    println!("{:>4} {:>6}  {:>20}  {:>20}", "var", "truth", "residual bootstrap", "two-step RW1");
    for j in 0..truth.q() {
        println!(
            "{:>4} {:>6.2}  [{:>7.3}, {:>7.3}]  [{:>7.3}, {:>7.3}]",
            data.names()[j],
            truth.beta0[j],
            ci_rb.low[j],
            ci_rb.high[j],
            ci_rw.low[j],
            ci_rw.high[j]
        );
    }
    Ok(())
}
