//! Full diagnostics for a batch: MSE, MSPE, selection probabilities,
//! intervals with coverage, and ecdf TV against a reference batch.

use rwlasso::diagnostics::{diagnose, DiagnoseOptions};
use rwlasso::sampler::{one_step_sample, two_step_sample};
use rwlasso::sim::{generate_dataset, SimSetting};
use rwlasso::solver::SolverConfig;
use rwlasso::weights::{WeightDistribution, WeightScheme};

fn main() -> rwlasso::Result<()> {
    let (train, truth, test) = generate_dataset(&SimSetting::table1(1)?, 0, 8)?;
    let cfg = SolverConfig::default();
    let dist = WeightDistribution::default();
    let batch = two_step_sample(&train, 20.0, 1000, &dist, WeightScheme::ObsOnly, 8, &cfg)?;
    let reference = one_step_sample(&train, 20.0, 2000, &dist, WeightScheme::ObsOnly, 9, &cfg)?;

    let opts = DiagnoseOptions {
        test: Some(&test),
        beta0: Some(&truth.beta0),
        reference: Some(&reference),
        ..Default::default()
    };
    let report = diagnose(&batch, &train, &opts)?;
    println!("mse {:.4}  mspe {:.4}  mean tv {:.4}", report.mse, report.mspe.unwrap(), report.tv_mean().unwrap());
    let covered = report.covered.as_ref().unwrap();
    let tv = report.tv_per_var.as_ref().unwrap();
    for j in 0..train.p() {
        println!(
            "{:>4} p_sel {:.3}  ci [{:.3}, {:.3}]  covers {}  tv {:.3}",
            train.names()[j],
            report.select_prob[j],
            report.ci_low[j],
            report.ci_high[j],
            covered[j],
            tv[j]
        );
    }
    Ok(())
}
