//! Two-step random weighting: weighted LASSO selection, then a weighted
//! least-squares refit on the selected columns.

use std::collections::BTreeMap;

use rwlasso::sampler::two_step_sample;
use rwlasso::sim::{generate_dataset, SimSetting};
use rwlasso::solver::SolverConfig;
use rwlasso::weights::{WeightDistribution, WeightScheme};

fn main() -> rwlasso::Result<()> {
    let (data, _, _) = generate_dataset(&SimSetting::table1(2)?, 0, 5)?;
    let batch = two_step_sample(
        &data,
        200.0,
        1000,
        &WeightDistribution::default(),
        WeightScheme::ObsOnly,
        5,
        &SolverConfig::default(),
    )?;

    // how often each selected set shows up
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for s in &batch.selected {
        *counts.entry(s.indices().iter().map(|j| j + 1).collect()).or_default() += 1;
    }
    let mut ranked: Vec<_> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    for (set, k) in ranked.iter().take(5) {
        println!("{:>5}  {:?}", k, set);
    }
    println!("distinct selected sets: {}", ranked.len());
    println!("first draw: {:?}", batch.draw(0));
    Ok(())
}
