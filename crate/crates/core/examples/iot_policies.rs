// The three IOT policies deciding a headline from lagged InfoCentre observations.
use std::collections::BTreeMap;

use roamsim::ids::OperatorId;
use roamsim::money::{Fraction, Money};
use roamsim::strategy::{decide_iot, observe_iots, IotHistory, IotPolicy, OwnState};

pub fn run_example() -> anyhow::Result<Vec<(String, Money)>> {
    let a1 = OperatorId::from("A1");
    let a2 = OperatorId::from("A2");
    let mut history = IotHistory::new(BTreeMap::from([(a1.clone(), Money(1_000_000)), (a2.clone(), Money(950_000))]));
    history.record(BTreeMap::from([(a1.clone(), Money(900_000)), (a2.clone(), Money(950_000))]));
    // in period 1, A2 sees period 0's levels, not A1's latest cut
    let view = observe_iots(&history, &a2, 1);
    let rivals = [a1.clone()];
    let policies = [
        ("hold", IotPolicy::Hold, true),
        (
            "undercut, steering closed",
            IotPolicy::Undercut {
                delta: Fraction::from_ppb(100_000_000),
                floor_micro: Money(400_000),
            },
            false,
        ),
        (
            "undercut, steering open",
            IotPolicy::Undercut {
                delta: Fraction::from_ppb(100_000_000),
                floor_micro: Money(400_000),
            },
            true,
        ),
        (
            "undercut, floored",
            IotPolicy::Undercut {
                delta: Fraction::from_ppb(700_000_000),
                floor_micro: Money(400_000),
            },
            true,
        ),
    ];
    let mut out = Vec::new();
    for (name, policy, steering_open) in policies {
        let own = OwnState {
            operator: &a2,
            current: Money(950_000),
            rivals: &rivals,
            steering_open,
            outlook: None,
        };
        let level = decide_iot(&policy, &view, &own)?;
        println!("{name:<26} -> {level}");
        out.push((name.to_string(), level));
    }
    Ok(out)
}

fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
