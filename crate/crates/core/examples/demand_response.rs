// Roaming volume of one cohort as its perceived retail price moves around the reference price.
use roamsim::money::Money;
use roamsim::scenario::load_scenario;

pub fn run_example() -> anyhow::Result<Vec<(Money, u64)>> {
    let scenario = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/two_country_baseline.json"))?;
    let params = &scenario.demand[&("B1".into(), "A".into())];
    println!(
        "base {} min at reference {}, elasticity {}",
        params.base_minutes, params.reference_price, params.elasticity
    );
    let mut curve = Vec::new();
    for pct in [50, 75, 100, 125, 150] {
        let price = Money(params.reference_price.0 * pct / 100);
        let volume = roamsim::demand::roaming_volume(params, price);
        println!("{price:>12} -> {volume} min");
        curve.push((price, volume));
    }
    Ok(curve)
}

fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
