// Rates one roamed call at wholesale and retail from the baseline scenario's tariffs.
use roamsim::money::Money;
use roamsim::scenario::load_scenario;
use roamsim::tariff::{rate_retail_mo, rate_wholesale_mo, CallDescriptor, Destination, Direction, PeriodClass, TermType, Usage};

pub fn run_example() -> anyhow::Result<(Money, Money)> {
    let scenario = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/two_country_baseline.json"))?;
    // a B1 subscriber roaming on A2 calls home for 95 seconds at peak
    let call = CallDescriptor {
        direction: Direction::Mo,
        home_operator: "B1".into(),
        home_country: "B".into(),
        visited_operator: "A2".into(),
        visited_country: "A".into(),
        destination: Some(Destination {
            country: "B".into(),
            term: TermType::Fixed,
        }),
        period: PeriodClass::Peak,
        usage: Usage::call(95),
    };
    let schedule = &scenario.schedules[&call.visited_operator][0];
    let wholesale = rate_wholesale_mo(schedule, &scenario.zone_maps[&call.visited_operator], &call)?;
    let retail = rate_retail_mo(&scenario.retail[&call.home_operator], wholesale, &call)?;
    println!("headline IOT of A2: {} per minute", schedule.headline_per_minute());
    println!(
        "95 s call bills {} units of {} s",
        roamsim::tariff::billed_units(95, schedule.billing_unit_s.into()),
        schedule.billing_unit_s
    );
    println!("wholesale charge {wholesale}, retail charge {retail}");
    Ok((wholesale, retail))
}

fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
