//! One-step random weighting: B weighted LASSO fits, summarized per variable.

use rwlasso::diagnostics::{credible_interval, selection_probabilities};
use rwlasso::sampler::one_step_sample;
use rwlasso::sim::{generate_dataset, SimSetting};
use rwlasso::solver::SolverConfig;
use rwlasso::weights::{WeightDistribution, WeightScheme};

fn main() -> rwlasso::Result<()> {
    let (data, truth, _) = generate_dataset(&SimSetting::table1(1)?, 0, 3)?;
    let batch = one_step_sample(
        &data,
        15.0,
        1000,
        &WeightDistribution::default(),
        WeightScheme::PerPenalty,
        3,
        &SolverConfig::default(),
    )?;
    let probs = selection_probabilities(&batch);
    let ci = credible_interval(&batch, 0.90)?;
    let mean = batch.mean();

    println!("{:>4} {:>7} {:>8} {:>8} {:>16}", "var", "truth", "p_sel", "mean", "90% interval");
    for j in 0..data.p() {
        println!(
            "{:>4} {:>7.2} {:>8.3} {:>8.3} [{:>6.3}, {:>6.3}]",
            data.names()[j],
            truth.beta0[j],
            probs[j],
            mean[j],
            ci.low[j],
            ci.high[j]
        );
    }
    println!("flagged draws: {}", batch.flagged_draws());
    Ok(())
}
