//! A short replicate loop over one simulation setting.
//!
//!     cargo run --release --example simulation_setting -- 8 20 300

use rwlasso::sim::{run_experiment, ExperimentConfig, SimSetting};

fn main() -> rwlasso::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |k: usize, d: usize| args.get(k).and_then(|s| s.parse().ok()).unwrap_or(d);
    let setting = SimSetting::table1(arg(0, 1) as u8)?.with_scale(arg(1, 10), arg(2, 200));
    let cfg = ExperimentConfig::default();
    let results = run_experiment(&setting, &cfg, 2024)?;

    println!("{} with T = {}, B = {}", setting.label(), setting.replicates, setting.draws);
    for (k, method) in cfg.methods.iter().enumerate() {
        let reports: Vec<_> = results.iter().filter_map(|r| r.methods[k].report.as_ref()).collect();
        let t = reports.len() as f64;
        let mse = reports.iter().map(|r| r.mse).sum::<f64>() / t;
        let cover: Vec<String> = (0..setting.q)
            .map(|j| {
                let c = reports.iter().filter(|r| r.covered.as_ref().is_some_and(|c| c[j])).count() as f64 / t;
                format!("{c:.2}")
            })
            .collect();
        let p_first_null = reports.iter().map(|r| r.select_prob[setting.q]).sum::<f64>() / t;
        println!(
            "{:<14} mse {:>8.4}  coverage [{}]  p_sel(x{}) {:.3}",
            method.to_string(),
            mse,
            cover.join(", "),
            setting.q + 1,
            p_first_null
        );
    }
    Ok(())
}
