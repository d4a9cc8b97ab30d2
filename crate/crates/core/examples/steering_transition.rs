// Paired runs with and without steering: discounts, list changes and the slide of headline IOTs.
use roamsim::money::Money;
use roamsim::scenario::{load_scenario, Scenario};
use roamsim::sim::{run, RunOutput};

pub fn paired_runs() -> anyhow::Result<(Scenario, RunOutput, Scenario, RunOutput)> {
    let on = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/steering_transition.json"))?;
    let off = on.modified(|f| f.steering.capability_from.clear())?;
    let run_on = run(&on, on.seed())?;
    let run_off = run(&off, off.seed())?;
    Ok((on, run_on, off, run_off))
}

pub fn run_example() -> anyhow::Result<(Money, Money)> {
    let (on, run_on, off, run_off) = paired_runs()?;
    for n in run_on.negotiations() {
        println!("period {:>2}: {} {} {} at {}", n.period, n.visited_op, n.decision, n.counterparty, n.tier_rate);
    }
    for o in run_on.ota() {
        let list: Vec<&str> = o.new_list.iter().map(|op| op.as_str()).collect();
        println!("period {:>2}: {} reprograms {} to [{}]", o.period, o.home_op, o.country, list.join(", "));
    }
    let last = on.horizon() - 1;
    let country = "A".into();
    let min_on = run_on.min_headline(&on, &country, last).unwrap_or(Money::ZERO);
    let min_off = run_off.min_headline(&off, &country, last).unwrap_or(Money::ZERO);
    println!("minimum headline IOT at the horizon: {min_off} without steering, {min_on} with");
    Ok((min_on, min_off))
}

fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
