// Settles a handful of calls into ledger chains and checks that every chain balances.
use roamsim::scenario::load_scenario;
use roamsim::settlement::{verify_conservation, ConservationReport};
use roamsim::sim::{Rater, SimState};
use roamsim::tariff::{CallDescriptor, Cdr, Destination, Direction, PeriodClass, TermType, Usage};

pub fn run_example() -> anyhow::Result<ConservationReport> {
    let scenario = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/two_country_baseline.json"))?;
    let schedules = SimState::new(&scenario, scenario.seed()).schedules();
    let rater = Rater {
        scenario: &scenario,
        schedules: &schedules,
    };
    let mo = |dest: &str, term, secs| CallDescriptor {
        direction: Direction::Mo,
        home_operator: "B2".into(),
        home_country: "B".into(),
        visited_operator: "A1".into(),
        visited_country: "A".into(),
        destination: Some(Destination { country: dest.into(), term }),
        period: PeriodClass::Offpeak,
        usage: Usage::call(secs),
    };
    let calls = [
        mo("B", TermType::Fixed, 61),
        mo("A", TermType::Mobile, 200),
        CallDescriptor {
            direction: Direction::Mt,
            destination: None,
            ..mo("B", TermType::Fixed, 45)
        },
    ];
    let mut ledger = Vec::new();
    for (id, call) in calls.into_iter().enumerate() {
        let cdr = Cdr {
            call_id: id as u64,
            period: 0,
            call,
            zone: None,
        };
        ledger.extend(rater.settle(&cdr)?.entries);
    }
    for e in &ledger {
        println!(
            "call {} {:>9} -> {:<9} {:<17} {}",
            e.call_ref,
            e.payer.to_string(),
            e.payee.to_string(),
            e.role.to_string(),
            e.amount
        );
    }
    let report = verify_conservation(&ledger);
    println!(
        "balanced: {}, customers paid {}, operators retained {}",
        report.balanced,
        report.paid_by_customers(),
        report.retained_by_operators()
    );
    Ok(report)
}

fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
