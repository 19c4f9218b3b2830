//! Real-data workflow: load a CSV, choose λ by two-step CV, draw a batch,
//! write it to disk and read it back.
//!
//!     cargo run --release --example csv_workflow -- housing.csv medv
//!
//! Without arguments a synthetic file is written to the temp directory.

use std::path::PathBuf;

use rwlasso::diagnostics::{diagnose, DiagnoseOptions};
use rwlasso::io::{load_csv, read_batch, write_batch, write_report_csv};
use rwlasso::sampler::{cross_validate, default_lambda_grid, two_step_sample, CvMode};
use rwlasso::sim::{generate_dataset, SimSetting};
use rwlasso::solver::SolverConfig;
use rwlasso::weights::{WeightDistribution, WeightScheme};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let work = std::env::temp_dir().join("rwlasso-csv-workflow");
    std::fs::create_dir_all(&work)?;
    let (path, response) = match args.as_slice() {
        [p, r, ..] => (PathBuf::from(p), r.clone()),
        _ => (synthetic(&work)?, "y".to_string()),
    };

    let data = load_csv(&path, &response)?;
    println!("loaded {} rows, {} predictors from {}", data.n(), data.p(), path.display());
    let cfg = SolverConfig::default();
    let grid = default_lambda_grid(&data, 100, 1e-3);
    let cv = cross_validate(&data, 5, &grid, CvMode::TwoStepLassoLs, 1, &cfg)?;
    let batch = two_step_sample(&data, cv.chosen_lambda, 1000, &WeightDistribution::default(), WeightScheme::ObsOnly, 1, &cfg)?;

    let out = work.join("batch");
    write_batch(&batch, &out)?;
    let back = read_batch(&out)?;
    assert_eq!(back, batch);
    let report = diagnose(&back, &data, &DiagnoseOptions::default())?;
    write_report_csv(&report, data.names(), out.join("diagnostics.csv"))?;
    println!("lambda {:.3}; batch and diagnostics in {}", cv.chosen_lambda, out.display());
    for (name, p) in data.names().iter().zip(&report.select_prob) {
        println!("{name:>10} {p:.3}");
    }
    Ok(())
}

fn synthetic(dir: &std::path::Path) -> Result<PathBuf, Box<dyn std::error::Error>> {
    let (data, _, _) = generate_dataset(&SimSetting::table1(1)?, 0, 99)?;
    let path = dir.join("synthetic.csv");
    let mut text = format!("{},y\n", data.names().join(","));
    for i in 0..data.n() {
        let row: Vec<String> = data.x().row(i).iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("{},{}\n", row.join(","), data.y()[i] + 10.0));
    }
    std::fs::write(&path, text)?;
    Ok(path)
}
