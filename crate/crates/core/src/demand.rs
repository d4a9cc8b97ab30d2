//! Roaming demand: perceived prices, volumes and call generation.
//!
//! Subscribers do not compare networks; they only notice the average price
//! per minute on last period's bill for a visited country. Total volume
//! responds to that perceived price with constant elasticity, while the
//! split across networks comes from network selection alone.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::ids::{CountryId, OperatorId};
use crate::money::{rational_from_f64, rational_int, Fraction, Money};
use crate::selection::{select_network_sampled, SelectionError, ShareVector, SimProfile, VisitedNetwork};
use crate::tariff::{CallDescriptor, Cdr, Destination, Direction, PeriodClass, TariffError, Usage, ZoneMap};

#[derive(Debug, thiserror::Error)]
pub enum DemandError {
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Tariff(#[from] TariffError),
    #[error("no zone map for visited operator {0}")]
    MissingZoneMap(OperatorId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One aggregate record per traffic cell carrying exact expected seconds.
    Expected,
    /// Sampled individual calls.
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DestinationWeight {
    pub country: CountryId,
    pub term: crate::tariff::TermType,
    pub weight: Fraction,
}

/// Demand of one home operator's subscribers roaming in one visited country.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandParams {
    /// Minutes per period at the reference price.
    pub base_minutes: u64,
    /// Price per minute at which demand equals `base_minutes`.
    pub reference_price: Money,
    pub elasticity: Fraction,
    /// Share of minutes that are received (MT) calls.
    pub mt_ratio: Fraction,
    /// Share of minutes diverted to call-back or local prepaid SIMs.
    pub substitution_share: Fraction,
    pub call_duration_mean_s: u32,
    pub peak_fraction: Fraction,
    pub destination_mix: Vec<DestinationWeight>,
}

/// Retail MO revenue and exact seconds per (home operator, visited country) for one period.
pub type PriceHistory = BTreeMap<(OperatorId, CountryId), (Money, BigRational)>;

/// Average retail MO price per minute on last period's bills, or the reference price when there is none.
pub fn perceived_price(history: Option<&PriceHistory>, home_op: &OperatorId, country: &CountryId, reference: Money) -> Money {
    let Some((revenue, seconds)) = history.and_then(|h| h.get(&(home_op.clone(), country.clone()))) else {
        return reference;
    };
    if seconds.is_zero() {
        return reference;
    }
    Money::round_rational(&(revenue.to_rational() * rational_int(60) / seconds))
}

/// Minutes demanded at a perceived price: `base × (p / p_ref)^(-ε) × (1 - substitution)`, rounded half-up.
pub fn roaming_volume(params: &DemandParams, perceived: Money) -> u64 {
    let keep = params.substitution_share.complement();
    if params.elasticity == Fraction::ZERO || perceived == params.reference_price {
        let exact = rational_int(params.base_minutes as i64) * keep.to_rational();
        return crate::money::round_half_up(&exact).to_u64().unwrap_or(0);
    }
    let ratio = perceived.0 as f64 / params.reference_price.0 as f64;
    let minutes = params.base_minutes as f64 * ratio.powf(-params.elasticity.to_f64()) * keep.to_f64();
    (minutes + 0.5).floor().max(0.0) as u64
}

/// Everything needed to turn one cohort's minutes into call records.
pub struct CohortTraffic<'a> {
    pub period: u32,
    pub home_operator: &'a OperatorId,
    pub home_country: &'a CountryId,
    pub visited_country: &'a CountryId,
    /// Total minutes demanded (MO and MT).
    pub minutes: u64,
    pub params: &'a DemandParams,
    pub shares: &'a ShareVector,
    pub profile: &'a SimProfile,
    pub networks: &'a [VisitedNetwork],
    pub retail_prices: &'a BTreeMap<OperatorId, Money>,
    pub zone_maps: &'a BTreeMap<OperatorId, ZoneMap>,
}

fn zone_for(traffic: &CohortTraffic<'_>, visited: &OperatorId, dest: &Destination) -> Result<crate::ids::ZoneId, DemandError> {
    let map = traffic.zone_maps.get(visited).ok_or_else(|| DemandError::MissingZoneMap(visited.clone()))?;
    Ok(map.resolve(dest, traffic.home_country)?)
}

fn descriptor(
    traffic: &CohortTraffic<'_>,
    direction: Direction,
    visited: &OperatorId,
    destination: Option<Destination>,
    period: PeriodClass,
    usage: Usage,
) -> CallDescriptor {
    CallDescriptor {
        direction,
        home_operator: traffic.home_operator.clone(),
        home_country: traffic.home_country.clone(),
        visited_operator: visited.clone(),
        visited_country: traffic.visited_country.clone(),
        destination,
        period,
        usage,
    }
}

/// Turns demanded minutes into call records.
///
/// Expected mode emits one aggregate record per (network, destination,
/// period class, direction) with exact expected seconds. Monte Carlo mode
/// samples a Poisson number of calls with exponential durations and
/// attaches each call by a sampled network selection.
pub fn generate_calls<R: Rng + ?Sized>(traffic: &CohortTraffic<'_>, mode: Mode, rng: &mut R, next_call_id: &mut u64) -> Result<Vec<Cdr>, DemandError> {
    match mode {
        Mode::Expected => expected_calls(traffic, next_call_id),
        Mode::MonteCarlo => sampled_calls(traffic, rng, next_call_id),
    }
}

fn expected_calls(traffic: &CohortTraffic<'_>, next_call_id: &mut u64) -> Result<Vec<Cdr>, DemandError> {
    let params = traffic.params;
    let total = rational_int(traffic.minutes as i64) * rational_int(60);
    let mt_total = &total * params.mt_ratio.to_rational();
    let mo_total = &total - &mt_total;
    let mean = rational_int(i64::from(params.call_duration_mean_s));
    let peak = params.peak_fraction.to_rational();
    let period_weights = [(PeriodClass::Peak, peak.clone()), (PeriodClass::Offpeak, rational_int(1) - peak)];
    let mut out = Vec::new();
    let mut push = |call: CallDescriptor, zone, out: &mut Vec<Cdr>| {
        out.push(Cdr {
            call_id: *next_call_id,
            period: traffic.period,
            call,
            zone,
        });
        *next_call_id += 1;
    };
    for (op, share) in &traffic.shares.entries {
        if *share <= 0.0 {
            continue;
        }
        let share = rational_from_f64(*share);
        for d in &params.destination_mix {
            for (class, w) in &period_weights {
                let seconds = &mo_total * &share * d.weight.to_rational() * w;
                if seconds.is_zero() {
                    continue;
                }
                let dest = Destination {
                    country: d.country.clone(),
                    term: d.term,
                };
                let zone = zone_for(traffic, op, &dest)?;
                let usage = Usage::Aggregate {
                    calls: &seconds / &mean,
                    seconds,
                };
                push(descriptor(traffic, Direction::Mo, op, Some(dest), *class, usage), Some(zone), &mut out);
            }
        }
        for (class, w) in &period_weights {
            let seconds = &mt_total * &share * w;
            if seconds.is_zero() {
                continue;
            }
            let usage = Usage::Aggregate {
                calls: &seconds / &mean,
                seconds,
            };
            push(descriptor(traffic, Direction::Mt, op, None, *class, usage), None, &mut out);
        }
    }
    Ok(out)
}

fn sampled_calls<R: Rng + ?Sized>(traffic: &CohortTraffic<'_>, rng: &mut R, next_call_id: &mut u64) -> Result<Vec<Cdr>, DemandError> {
    let params = traffic.params;
    let mean = f64::from(params.call_duration_mean_s.max(1));
    let lambda = traffic.minutes as f64 * 60.0 / mean;
    if lambda <= 0.0 || params.destination_mix.is_empty() {
        return Ok(Vec::new());
    }
    let count = Poisson::new(lambda).expect("positive rate").sample(rng) as u64;
    let durations = Exp::new(1.0 / mean).expect("positive mean");
    let weights: Vec<f64> = params.destination_mix.iter().map(|d| d.weight.to_f64()).collect();
    let mut out = Vec::new();
    for _ in 0..count {
        let direction = if rng.random::<f64>() < params.mt_ratio.to_f64() {
            Direction::Mt
        } else {
            Direction::Mo
        };
        let attached = select_network_sampled(traffic.profile, traffic.visited_country, traffic.networks, traffic.retail_prices, rng)?;
        let class = if rng.random::<f64>() < params.peak_fraction.to_f64() {
            PeriodClass::Peak
        } else {
            PeriodClass::Offpeak
        };
        let destination = match direction {
            Direction::Mo => {
                let mut u = rng.random::<f64>();
                let mut pick = params.destination_mix.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        pick = i;
                        break;
                    }
                    u -= w;
                }
                let d = &params.destination_mix[pick];
                Some(Destination {
                    country: d.country.clone(),
                    term: d.term,
                })
            }
            Direction::Mt => None,
        };
        let duration_s = (durations.sample(rng) + 0.5).floor() as u64;
        let Some(op) = attached else { continue };
        let zone = match &destination {
            Some(d) => Some(zone_for(traffic, &op, d)?),
            None => None,
        };
        let call = descriptor(traffic, direction, &op, destination, class, Usage::call(duration_s));
        out.push(Cdr {
            call_id: *next_call_id,
            period: traffic.period,
            call,
            zone,
        });
        *next_call_id += 1;
    }
    Ok(out)
}

/// Exact seconds per visited operator across records.
pub fn seconds_by_network(cdrs: &[Cdr]) -> BTreeMap<OperatorId, BigRational> {
    let mut out: BTreeMap<OperatorId, BigRational> = BTreeMap::new();
    for c in cdrs {
        *out.entry(c.call.visited_operator.clone())
            .or_insert_with(|| BigRational::from_integer(BigInt::zero())) += c.call.usage.seconds();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::{expected_shares, Band};
    use crate::tariff::TermType;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(base: u64, eps: Fraction, subst: Fraction) -> DemandParams {
        DemandParams {
            base_minutes: base,
            reference_price: Money(1_000_000),
            elasticity: eps,
            mt_ratio: Fraction::ZERO,
            substitution_share: subst,
            call_duration_mean_s: 120,
            peak_fraction: Fraction::decimal(6, 1),
            destination_mix: vec![DestinationWeight {
                country: "B".into(),
                term: TermType::Fixed,
                weight: Fraction::ONE,
            }],
        }
    }

    #[test]
    fn perceived_price_examples() {
        let home = OperatorId::from("B1");
        let a = CountryId::from("A");
        assert_eq!(perceived_price(None, &home, &a, Money(777)), Money(777));
        // 10 minutes at 1,200,000 per minute
        let h: PriceHistory = BTreeMap::from([((home.clone(), a.clone()), (Money(12_000_000), rational_int(600)))]);
        assert_eq!(perceived_price(Some(&h), &home, &a, Money(1)), Money(1_200_000));
        // 60 minutes at 1,000,000 and 40 at 2,000,000
        let h: PriceHistory = BTreeMap::from([((home.clone(), a.clone()), (Money(60_000_000 + 80_000_000), rational_int(6_000)))]);
        assert_eq!(perceived_price(Some(&h), &home, &a, Money(1)), Money(1_400_000));
        let h: PriceHistory = BTreeMap::from([((home.clone(), a.clone()), (Money(0), rational_int(0)))]);
        assert_eq!(perceived_price(Some(&h), &home, &a, Money(5)), Money(5));
    }

    #[test]
    fn volume_examples() {
        let p = params(1_000, Fraction::ONE, Fraction::decimal(2, 1));
        assert_eq!(roaming_volume(&p, Money(1_000_000)), 800);
        let p = params(1_000, Fraction::ONE, Fraction::ZERO);
        // closed form: 1000 / 0.7 = 1428.57…
        assert_eq!(roaming_volume(&p, Money(700_000)), (1_000.0f64 / 0.7).round() as u64);
        assert_eq!(roaming_volume(&p, Money(700_000)), 1_429);
        let p = params(1_000, Fraction::ZERO, Fraction::ZERO);
        assert_eq!(roaming_volume(&p, Money(1)), 1_000);
        assert_eq!(roaming_volume(&p, Money(9_000_000)), 1_000);
    }

    fn networks() -> Vec<VisitedNetwork> {
        vec![
            VisitedNetwork {
                operator: "A1".into(),
                band: Band::Gsm900,
                coverage: Fraction::decimal(6, 1),
            },
            VisitedNetwork {
                operator: "A2".into(),
                band: Band::Gsm1800,
                coverage: Fraction::ONE,
            },
        ]
    }

    fn zone_maps() -> BTreeMap<OperatorId, ZoneMap> {
        ["A1", "A2"]
            .into_iter()
            .map(|op| {
                let mut entries = BTreeMap::new();
                for t in TermType::ALL {
                    entries.insert(("B".into(), t), "INTL".into());
                }
                (
                    op.into(),
                    ZoneMap {
                        owner: op.into(),
                        country: "A".into(),
                        domestic_zone: Some("DOM".into()),
                        home_zone: None,
                        entries,
                    },
                )
            })
            .collect()
    }

    fn profile() -> SimProfile {
        SimProfile {
            home_operator: "B1".into(),
            preferred: BTreeMap::from([("A".into(), vec!["A1".into(), "A2".into()])]),
            handset_band_mix: Fraction::decimal(7, 1),
            manual_propensity: Fraction::ZERO,
        }
    }

    fn with_traffic<T>(minutes: u64, p: &DemandParams, f: impl FnOnce(&CohortTraffic<'_>) -> T) -> T {
        let nets = networks();
        let prof = profile();
        let shares = expected_shares(&prof, &"A".into(), &nets, &BTreeMap::new()).unwrap();
        let zm = zone_maps();
        let prices = BTreeMap::new();
        let (home, hc, vc) = (OperatorId::from("B1"), CountryId::from("B"), CountryId::from("A"));
        let t = CohortTraffic {
            period: 0,
            home_operator: &home,
            home_country: &hc,
            visited_country: &vc,
            minutes,
            params: p,
            shares: &shares,
            profile: &prof,
            networks: &nets,
            retail_prices: &prices,
            zone_maps: &zm,
        };
        f(&t)
    }

    #[test]
    fn expected_mode_single_network() {
        let nets = vec![VisitedNetwork {
            operator: "A1".into(),
            band: Band::Gsm900,
            coverage: Fraction::ONE,
        }];
        let shares = ShareVector {
            entries: vec![("A1".into(), 1.0)],
        };
        let mut p = params(100, Fraction::ONE, Fraction::ZERO);
        p.peak_fraction = Fraction::ONE;
        let zm = zone_maps();
        let (home, hc, vc) = (OperatorId::from("B1"), CountryId::from("B"), CountryId::from("A"));
        let prof = profile();
        let prices = BTreeMap::new();
        let t = CohortTraffic {
            period: 0,
            home_operator: &home,
            home_country: &hc,
            visited_country: &vc,
            minutes: 100,
            params: &p,
            shares: &shares,
            profile: &prof,
            networks: &nets,
            retail_prices: &prices,
            zone_maps: &zm,
        };
        let mut id = 0;
        let cdrs = generate_calls(&t, Mode::Expected, &mut ChaCha8Rng::seed_from_u64(0), &mut id).unwrap();
        assert_eq!(cdrs.len(), 1);
        assert_eq!(cdrs[0].call.usage.seconds(), rational_int(6_000));
        assert_eq!(cdrs[0].zone, Some("INTL".into()));
        assert_eq!(id, 1);
    }

    #[test]
    fn expected_mode_conserves_minutes() {
        let mut p = params(0, Fraction::ONE, Fraction::ZERO);
        p.mt_ratio = Fraction::decimal(3, 1);
        p.destination_mix = vec![
            DestinationWeight {
                country: "B".into(),
                term: TermType::Fixed,
                weight: Fraction::decimal(7, 1),
            },
            DestinationWeight {
                country: "A".into(),
                term: TermType::Mobile,
                weight: Fraction::decimal(3, 1),
            },
        ];
        let cdrs = with_traffic(1_234, &p, |t| {
            generate_calls(t, Mode::Expected, &mut ChaCha8Rng::seed_from_u64(0), &mut 0).unwrap()
        });
        let shares = with_traffic(0, &p, |t| t.shares.clone());
        let covered: BigRational = shares.entries.iter().map(|(_, s)| rational_from_f64(*s)).sum();
        let total: BigRational = cdrs.iter().map(|c| c.call.usage.seconds()).sum();
        assert_eq!(total, rational_int(1_234 * 60) * &covered);
        let mt: BigRational = cdrs.iter().filter(|c| c.call.direction == Direction::Mt).map(|c| c.call.usage.seconds()).sum();
        assert_eq!(mt, rational_int(1_234 * 60) * Fraction::decimal(3, 1).to_rational() * covered);
        assert!(cdrs.iter().filter(|c| c.call.is_visited_domestic()).all(|c| c.zone == Some("DOM".into())));
    }

    #[test]
    fn monte_carlo_replays_under_a_seed() {
        let p = params(0, Fraction::ONE, Fraction::ZERO);
        let run = |seed| {
            with_traffic(500, &p, |t| {
                generate_calls(t, Mode::MonteCarlo, &mut ChaCha8Rng::seed_from_u64(seed), &mut 0).unwrap()
            })
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn monte_carlo_matches_expected_mode_within_three_sigma() {
        // about 10^5 calls of mean 120 s
        let minutes = 200_000u64;
        let p = params(0, Fraction::ONE, Fraction::ZERO);
        let expected = with_traffic(minutes, &p, |t| {
            seconds_by_network(&generate_calls(t, Mode::Expected, &mut ChaCha8Rng::seed_from_u64(0), &mut 0).unwrap())
        });
        let sampled = with_traffic(minutes, &p, |t| {
            seconds_by_network(&generate_calls(t, Mode::MonteCarlo, &mut ChaCha8Rng::seed_from_u64(11), &mut 0).unwrap())
        });
        let lambda = minutes as f64 * 60.0 / 120.0;
        for (op, exp) in &expected {
            let exp = exp.to_f64().unwrap();
            let share = exp / (minutes as f64 * 60.0);
            // compound Poisson: Var = λ p E[D²], E[D²] = 2 mean²
            let sigma = (lambda * share * 2.0 * 120.0f64.powi(2)).sqrt();
            let got = sampled.get(op).map_or(0.0, |s| s.to_f64().unwrap());
            assert!((got - exp).abs() <= 3.0 * sigma, "{op}: sampled {got} expected {exp} sigma {sigma}");
        }
    }

    proptest! {
        #[test]
        fn volume_falls_with_price(base in 0u64..1_000_000, eps in 1i64..40, p1 in 1i64..5_000_000, dp in 0i64..5_000_000) {
            let p = params(base, Fraction::decimal(eps, 1), Fraction::ZERO);
            prop_assert!(roaming_volume(&p, Money(p1 + dp)) <= roaming_volume(&p, Money(p1)));
        }

        #[test]
        fn substitution_only_removes_minutes(base in 0u64..1_000_000, s in 0i64..1000, price in 1i64..5_000_000) {
            let with = params(base, Fraction::ONE, Fraction::decimal(s, 3));
            let without = params(base, Fraction::ONE, Fraction::ZERO);
            prop_assert!(roaming_volume(&with, Money(price)) <= roaming_volume(&without, Money(price)));
        }

        #[test]
        fn inelastic_volume_is_constant(base in 0u64..1_000_000, price in 1i64..5_000_000) {
            let p = params(base, Fraction::ZERO, Fraction::ZERO);
            prop_assert_eq!(roaming_volume(&p, Money(price)), base);
        }
    }
}
