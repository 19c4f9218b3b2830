//! One-step (LASSO) and two-step (LASSO+LS) cross-validation on one dataset.

use rwlasso::sampler::{cross_validate_both, default_lambda_grid};
use rwlasso::sim::{generate_dataset, SimSetting};
use rwlasso::solver::SolverConfig;

fn main() -> rwlasso::Result<()> {
    let (data, _, _) = generate_dataset(&SimSetting::table1(2)?, 0, 21)?;
    let grid = default_lambda_grid(&data, 100, 1e-3);
    let (one, two) = cross_validate_both(&data, 5, &grid, 21, &SolverConfig::default())?;

    println!("{:>12} {:>12} {:>12}", "lambda", "one-step", "two-step");
    for k in (0..grid.len()).step_by(10) {
        println!("{:>12.3} {:>12.4} {:>12.4}", grid[k], one.cv_error[k], two.cv_error[k]);
    }
    println!("chosen: one-step {:.3}, two-step {:.3}", one.chosen_lambda, two.chosen_lambda);
    Ok(())
}
