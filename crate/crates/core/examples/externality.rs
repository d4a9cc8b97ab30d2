// Cuts one operator's IOT and shows that shares stay put while every network carries more traffic.
use roamsim::money::Fraction;
use roamsim::scenario::load_scenario;
use roamsim::sim::{externality_experiment, ExternalityReport};

pub fn run_example() -> anyhow::Result<ExternalityReport> {
    let scenario = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/two_country_baseline.json"))?;
    let report = externality_experiment(&scenario, &"A1".into(), "0.3".parse::<Fraction>()?)?;
    for r in report.rows.iter().filter(|r| r.period == 1) {
        println!(
            "{}: share {:.4} (delta {}), minutes {:.0} -> {:.0}, revenue {} -> {}",
            r.operator, r.share_base, r.share_delta, r.minutes_base, r.minutes_perturbed, r.revenue_base, r.revenue_perturbed
        );
    }
    let t = report.totals[1];
    println!("country minutes in period 1: {} -> {}", t.minutes_base, t.minutes_perturbed);
    Ok(report)
}

fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
