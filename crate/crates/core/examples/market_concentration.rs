// Concentration and retail mark-up metrics on the Western Europe roster.
use roamsim::scenario::load_scenario;
use roamsim::sim::{run, MetricsRow};

pub fn run_example() -> anyhow::Result<Vec<MetricsRow>> {
    let scenario = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/table1_western_europe.json"))?;
    let output = run(&scenario, scenario.seed())?;
    let first = output.periods.first().map(|p| p.metrics.clone()).unwrap_or_default();
    println!("{:<8} {:>8} {:>8} {:>8}", "country", "leader", "cr2", "ratio");
    for country in scenario.roster.keys() {
        let rows: Vec<&MetricsRow> = first.iter().filter(|m| &m.country == country).collect();
        let leader = rows.iter().map(|m| m.wholesale_share).fold(0.0, f64::max);
        let ratio = rows.iter().find_map(|m| m.ratio_vs_nonroamed).unwrap_or(f64::NAN);
        println!("{:<8} {leader:>8.3} {:>8.3} {ratio:>8.3}", country.as_str(), rows[0].cr2);
    }
    Ok(first)
}

fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
