//! Strong irrepresentable condition for every simulation setting, on the
//! population covariance and on one realized design.

use rwlasso::diagnostics::{check_irrepresentable, irrepresentable_from_gram, IRREPRESENTABLE_SLACK};
use rwlasso::model::SupportSet;
use rwlasso::sim::{generate_dataset, SimSetting};

fn main() -> rwlasso::Result<()> {
    println!("{:>8} {:>12} {:>10} {:>12} {:>10}", "setting", "population", "max lhs", "realized", "max lhs");
    for id in 1..=8u8 {
        let s = SimSetting::table1(id)?;
        let support = SupportSet::new((0..s.q).collect(), s.p)?;
        let pop = irrepresentable_from_gram(&s.sigma()?, &support, &vec![1.0; s.q], IRREPRESENTABLE_SLACK)?;
        let (train, truth, _) = generate_dataset(&s, 0, 1)?;
        let real = check_irrepresentable(&train, &truth)?;
        let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        println!(
            "{:>8} {:>12} {:>10.4} {:>12} {:>10.4}",
            id,
            verdict(pop.satisfied),
            max(&pop.lhs),
            verdict(real.satisfied),
            max(&real.lhs)
        );
    }
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "violated"
    }
}
