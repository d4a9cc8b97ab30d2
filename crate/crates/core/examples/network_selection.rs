// Expected attachment shares from preferred lists, coverage and handset bands, against sampling.
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roamsim::ids::{CountryId, OperatorId};
use roamsim::money::Fraction;
use roamsim::selection::{expected_shares, select_network_sampled, Band, ShareVector, SimProfile, VisitedNetwork};

pub fn run_example() -> anyhow::Result<(ShareVector, BTreeMap<OperatorId, f64>)> {
    let country = CountryId::from("A");
    let network = |id: &str, band, coverage: &str| VisitedNetwork {
        operator: id.into(),
        band,
        coverage: coverage.parse().expect("fraction"),
    };
    let networks = [
        network("A1", Band::Gsm900, "0.8"),
        network("A2", Band::Gsm900, "0.9"),
        network("A3", Band::Gsm1800, "0.7"),
    ];
    let profile = SimProfile {
        home_operator: "B1".into(),
        preferred: BTreeMap::from([(country.clone(), vec!["A3".into(), "A1".into()])]),
        handset_band_mix: Fraction::from_ppb(600_000_000),
        manual_propensity: Fraction::ZERO,
    };
    let shares = expected_shares(&profile, &country, &networks, &BTreeMap::new())?;
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts: BTreeMap<OperatorId, f64> = BTreeMap::new();
    for _ in 0..draws {
        if let Some(op) = select_network_sampled(&profile, &country, &networks, &BTreeMap::new(), &mut rng)? {
            *counts.entry(op).or_default() += 1.0 / draws as f64;
        }
    }
    for (op, s) in &shares.entries {
        println!("{op}: expected {s:.6}, sampled {:.6}", counts.get(op).copied().unwrap_or(0.0));
    }
    println!("no service: {:.6}", shares.no_service());
    Ok((shares, counts))
}

fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
