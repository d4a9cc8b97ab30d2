//! Wholesale (IOT) and retail tariff structures, and call rating.
//!
//! Rating is exact: single calls are billed in whole units (rounded up, at
//! least one unit), aggregate usage records are billed pro rata on exact
//! rational seconds and rounded half-up to a micro-unit once per record.

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::ids::{CountryId, OperatorId, ZoneId};
use crate::money::{Fraction, Money};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TariffError {
    #[error("zone map of {operator} has no zone for {destination}")]
    UnmappedDestination { operator: OperatorId, destination: String },
    #[error("no retail group rate for visited country {country}")]
    MissingGroupRate { country: CountryId },
    #[error("no retail MT price for visited country {country}")]
    MissingMtPrice { country: CountryId },
    #[error("schedule of {operator} has no rate for zone {zone} ({period}, {term})")]
    MissingRate {
        operator: OperatorId,
        zone: ZoneId,
        period: PeriodClass,
        term: TermType,
    },
    #[error("{0} call passed to a {1} rater")]
    WrongDirection(Direction, Direction),
    #[error("MO call without destination")]
    MissingDestination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Mo,
    Mt,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Mo => "MO",
            Direction::Mt => "MT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodClass {
    Peak,
    Offpeak,
}

impl PeriodClass {
    pub const ALL: [PeriodClass; 2] = [PeriodClass::Peak, PeriodClass::Offpeak];
}

impl fmt::Display for PeriodClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PeriodClass::Peak => "peak",
            PeriodClass::Offpeak => "offpeak",
        })
    }
}

/// Type of the network the called party is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermType {
    Fixed,
    Mobile,
}

impl TermType {
    pub const ALL: [TermType; 2] = [TermType::Fixed, TermType::Mobile];
}

impl fmt::Display for TermType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TermType::Fixed => "fixed",
            TermType::Mobile => "mobile",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Destination {
    pub country: CountryId,
    pub term: TermType,
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.country, self.term)
    }
}

/// How much traffic a call record carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Usage {
    /// One connected call of whole seconds.
    Call { duration_s: u64 },
    /// An expected-value aggregate: exact total seconds over an exact (fractional) number of calls.
    Aggregate { seconds: BigRational, calls: BigRational },
}

impl Usage {
    pub fn call(duration_s: u64) -> Self {
        Usage::Call { duration_s }
    }

    /// Exact conversation seconds carried.
    pub fn seconds(&self) -> BigRational {
        match self {
            Usage::Call { duration_s } => BigRational::from_integer(BigInt::from(*duration_s)),
            Usage::Aggregate { seconds, .. } => seconds.clone(),
        }
    }

    fn calls(&self) -> BigRational {
        match self {
            Usage::Call { .. } => BigRational::from_integer(BigInt::from(1)),
            Usage::Aggregate { calls, .. } => calls.clone(),
        }
    }

    /// Billed units of `unit_s` seconds: whole units for a call, exact pro rata for an aggregate.
    pub fn billed(&self, unit_s: u32) -> BigRational {
        match self {
            Usage::Call { duration_s } => BigRational::from_integer(BigInt::from(billed_units(*duration_s, u64::from(unit_s)))),
            Usage::Aggregate { seconds, .. } => seconds / BigRational::from_integer(BigInt::from(unit_s)),
        }
    }

    /// Billed minutes (whole minutes rounded up for a call).
    pub fn billed_minutes(&self) -> BigRational {
        self.billed(60)
    }
}

/// Number of billing units charged for a call: `ceil(duration / unit)`, at least one.
pub fn billed_units(duration_s: u64, billing_unit_s: u64) -> u64 {
    assert!(billing_unit_s > 0, "billing unit must be positive");
    duration_s.div_ceil(billing_unit_s).max(1)
}

/// One roamed call (or an aggregate of identical calls) to be rated and settled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallDescriptor {
    pub direction: Direction,
    pub home_operator: OperatorId,
    pub home_country: CountryId,
    pub visited_operator: OperatorId,
    pub visited_country: CountryId,
    /// Called destination, MO only.
    pub destination: Option<Destination>,
    pub period: PeriodClass,
    pub usage: Usage,
}

impl CallDescriptor {
    /// True for an MO call to a number in the visited country.
    pub fn is_visited_domestic(&self) -> bool {
        self.destination.as_ref().is_some_and(|d| d.country == self.visited_country)
    }
}

/// A call detail record: a rated unit of roaming usage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cdr {
    pub call_id: u64,
    pub period: u32,
    pub call: CallDescriptor,
    /// Visited operator's tariff zone (MO only).
    pub zone: Option<ZoneId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RateKey {
    pub zone: ZoneId,
    pub period: PeriodClass,
    pub term: TermType,
}

/// A visited operator's inter-operator tariff.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IotSchedule {
    pub owner: OperatorId,
    /// Rate per billing unit.
    pub rates: BTreeMap<RateKey, Money>,
    pub billing_unit_s: u32,
    pub setup_fee: Money,
    /// MT rate per billing unit, zero in the default regime.
    pub mt_rate: Money,
    pub valid_from: u32,
    /// Zone whose peak fixed-terminated rate is quoted as the headline IOT.
    pub headline_zone: ZoneId,
}

impl IotSchedule {
    pub fn rate(&self, zone: &ZoneId, period: PeriodClass, term: TermType) -> Result<Money, TariffError> {
        self.rates
            .get(&RateKey {
                zone: zone.clone(),
                period,
                term,
            })
            .copied()
            .ok_or_else(|| TariffError::MissingRate {
                operator: self.owner.clone(),
                zone: zone.clone(),
                period,
                term,
            })
    }

    /// Headline IOT per minute: the headline zone's peak fixed rate scaled to 60 seconds.
    pub fn headline_per_minute(&self) -> Money {
        let per_unit = self
            .rates
            .get(&RateKey {
                zone: self.headline_zone.clone(),
                period: PeriodClass::Peak,
                term: TermType::Fixed,
            })
            .copied()
            .unwrap_or(Money::ZERO);
        per_unit.mul_div_round(60, i128::from(self.billing_unit_s))
    }

    /// The schedule scaled proportionally so its headline becomes `level`.
    ///
    /// Every rate, the setup fee and the MT rate are multiplied by
    /// `level / headline` and rounded half-up. A zero headline leaves the
    /// schedule unchanged.
    pub fn scaled_to(&self, level: Money) -> IotSchedule {
        let base = self.headline_per_minute();
        if base == Money::ZERO || base == level {
            return self.clone();
        }
        let num = i128::from(level.0);
        let den = i128::from(base.0);
        let scale = |m: Money| m.mul_div_round(num, den);
        IotSchedule {
            owner: self.owner.clone(),
            rates: self.rates.iter().map(|(k, v)| (k.clone(), scale(*v))).collect(),
            billing_unit_s: self.billing_unit_s,
            setup_fee: scale(self.setup_fee),
            mt_rate: scale(self.mt_rate),
            valid_from: self.valid_from,
            headline_zone: self.headline_zone.clone(),
        }
    }
}

/// Maps destinations to a visited operator's tariff zones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneMap {
    pub owner: OperatorId,
    /// Country the owner is licensed in.
    pub country: CountryId,
    /// Zone for calls to numbers in the visited country, if special-cased.
    pub domestic_zone: Option<ZoneId>,
    /// Zone for calls back to the roamer's home country, if special-cased.
    pub home_zone: Option<ZoneId>,
    pub entries: BTreeMap<(CountryId, TermType), ZoneId>,
}

impl ZoneMap {
    pub fn resolve(&self, destination: &Destination, home_country: &CountryId) -> Result<ZoneId, TariffError> {
        if destination.country == self.country {
            if let Some(z) = &self.domestic_zone {
                return Ok(z.clone());
            }
        } else if &destination.country == home_country {
            if let Some(z) = &self.home_zone {
                return Ok(z.clone());
            }
        }
        self.entries
            .get(&(destination.country.clone(), destination.term))
            .cloned()
            .ok_or_else(|| TariffError::UnmappedDestination {
                operator: self.owner.clone(),
                destination: destination.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetailGroup {
    pub id: String,
    pub countries: Vec<CountryId>,
    pub rate_micro_per_min: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RetailVariant {
    /// Fixed percentage margin on top of the IOT.
    Markup { markup: Fraction },
    /// One per-minute rate for roaming anywhere in a group of countries.
    SingleRate { groups: Vec<RetailGroup> },
}

/// A home operator's retail roaming tariff.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetailScheme {
    pub variant: RetailVariant,
    /// Price per minute of an international mobile call to each visited country.
    pub mt_prices: BTreeMap<CountryId, Money>,
}

impl RetailScheme {
    pub fn group_rate(&self, country: &CountryId) -> Result<Money, TariffError> {
        match &self.variant {
            RetailVariant::SingleRate { groups } => groups
                .iter()
                .find(|g| g.countries.contains(country))
                .map(|g| g.rate_micro_per_min)
                .ok_or_else(|| TariffError::MissingGroupRate { country: country.clone() }),
            RetailVariant::Markup { .. } => Err(TariffError::MissingGroupRate { country: country.clone() }),
        }
    }

    /// Retail price per minute the subscriber sees on a network whose headline IOT is `iot_per_min`.
    pub fn price_per_minute(&self, country: &CountryId, iot_per_min: Money) -> Result<Money, TariffError> {
        match &self.variant {
            RetailVariant::Markup { markup } => Ok(markup.one_plus_of(iot_per_min)),
            RetailVariant::SingleRate { .. } => self.group_rate(country),
        }
    }
}

fn round_charge(r: BigRational) -> Money {
    Money::round_rational(&r)
}

/// Wholesale charge for an MO call: setup fee plus billed units at the zone rate.
pub fn rate_wholesale_mo(schedule: &IotSchedule, zones: &ZoneMap, call: &CallDescriptor) -> Result<Money, TariffError> {
    if call.direction != Direction::Mo {
        return Err(TariffError::WrongDirection(call.direction, Direction::Mo));
    }
    let destination = call.destination.as_ref().ok_or(TariffError::MissingDestination)?;
    let zone = zones.resolve(destination, &call.home_country)?;
    let rate = schedule.rate(&zone, call.period, destination.term)?;
    let charge = schedule.setup_fee.to_rational() * call.usage.calls() + rate.to_rational() * call.usage.billed(schedule.billing_unit_s);
    Ok(round_charge(charge))
}

/// Wholesale charge for an MT call (zero under the default MT rate).
pub fn rate_wholesale_mt(schedule: &IotSchedule, call: &CallDescriptor) -> Result<Money, TariffError> {
    if call.direction != Direction::Mt {
        return Err(TariffError::WrongDirection(call.direction, Direction::Mt));
    }
    Ok(round_charge(schedule.mt_rate.to_rational() * call.usage.billed(schedule.billing_unit_s)))
}

/// Retail charge for an MO roamed call.
pub fn rate_retail_mo(scheme: &RetailScheme, wholesale_charge: Money, call: &CallDescriptor) -> Result<Money, TariffError> {
    if call.direction != Direction::Mo {
        return Err(TariffError::WrongDirection(call.direction, Direction::Mo));
    }
    match &scheme.variant {
        RetailVariant::Markup { markup } => Ok(markup.one_plus_of(wholesale_charge)),
        RetailVariant::SingleRate { .. } => {
            let rate = scheme.group_rate(&call.visited_country)?;
            Ok(round_charge(rate.to_rational() * call.usage.billed_minutes()))
        }
    }
}

/// Retail charge for a received (MT) roamed call: the international mobile call price.
pub fn rate_retail_mt(scheme: &RetailScheme, call: &CallDescriptor) -> Result<Money, TariffError> {
    if call.direction != Direction::Mt {
        return Err(TariffError::WrongDirection(call.direction, Direction::Mt));
    }
    let price = scheme
        .mt_prices
        .get(&call.visited_country)
        .copied()
        .ok_or_else(|| TariffError::MissingMtPrice {
            country: call.visited_country.clone(),
        })?;
    Ok(round_charge(price.to_rational() * call.usage.billed_minutes()))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn schedule(rate_per_unit: i64, unit: u32, setup: i64) -> IotSchedule {
        let mut rates = BTreeMap::new();
        for zone in ["Z0", "Z1", "Z2"] {
            for period in PeriodClass::ALL {
                for term in TermType::ALL {
                    rates.insert(
                        RateKey {
                            zone: zone.into(),
                            period,
                            term,
                        },
                        Money(rate_per_unit),
                    );
                }
            }
        }
        IotSchedule {
            owner: "A1".into(),
            rates,
            billing_unit_s: unit,
            setup_fee: Money(setup),
            mt_rate: Money::ZERO,
            valid_from: 0,
            headline_zone: "Z1".into(),
        }
    }

    pub fn zones() -> ZoneMap {
        let mut entries = BTreeMap::new();
        for term in TermType::ALL {
            entries.insert(("B".into(), term), ZoneId::from("Z1"));
            entries.insert(("C".into(), term), ZoneId::from("Z1"));
            entries.insert(("D".into(), term), ZoneId::from("Z2"));
        }
        ZoneMap {
            owner: "A1".into(),
            country: "A".into(),
            domestic_zone: Some("Z0".into()),
            home_zone: None,
            entries,
        }
    }

    pub fn mo_call(dest: &str, duration_s: u64) -> CallDescriptor {
        CallDescriptor {
            direction: Direction::Mo,
            home_operator: "B1".into(),
            home_country: "B".into(),
            visited_operator: "A1".into(),
            visited_country: "A".into(),
            destination: Some(Destination {
                country: dest.into(),
                term: TermType::Fixed,
            }),
            period: PeriodClass::Peak,
            usage: Usage::call(duration_s),
        }
    }

    pub fn mt_call(duration_s: u64) -> CallDescriptor {
        CallDescriptor {
            direction: Direction::Mt,
            destination: None,
            ..mo_call("B", duration_s)
        }
    }

    pub fn markup(m: Fraction) -> RetailScheme {
        RetailScheme {
            variant: RetailVariant::Markup { markup: m },
            mt_prices: BTreeMap::from([("A".into(), Money(900_000))]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn billed_units_examples() {
        assert_eq!(billed_units(90, 30), 3);
        assert_eq!(billed_units(91, 30), 4);
        assert_eq!(billed_units(0, 60), 1);
    }

    #[test]
    fn wholesale_mo_example() {
        // 500,000 µ per minute at a 30 s unit is 250,000 µ per unit.
        let s = schedule(250_000, 30, 100_000);
        let charge = rate_wholesale_mo(&s, &zones(), &mo_call("B", 90)).unwrap();
        assert_eq!(charge, Money(100_000 + 3 * 250_000));
    }

    #[test]
    fn zero_duration_bills_one_unit() {
        let s = schedule(12_345, 60, 0);
        assert_eq!(rate_wholesale_mo(&s, &zones(), &mo_call("B", 0)).unwrap(), Money(12_345));
    }

    #[test]
    fn same_zone_destinations_rate_identically() {
        let s = schedule(250_000, 30, 100_000);
        let b = rate_wholesale_mo(&s, &zones(), &mo_call("B", 75)).unwrap();
        let c = rate_wholesale_mo(&s, &zones(), &mo_call("C", 75)).unwrap();
        assert_eq!(b, c);
    }

    #[test]
    fn unmapped_destination_is_an_error() {
        let s = schedule(1, 30, 0);
        let err = rate_wholesale_mo(&s, &zones(), &mo_call("Q", 10)).unwrap_err();
        assert!(matches!(err, TariffError::UnmappedDestination { .. }));
    }

    #[test]
    fn home_zone_overrides_entries() {
        let mut z = zones();
        z.home_zone = Some("Z2".into());
        assert_eq!(
            z.resolve(
                &Destination {
                    country: "B".into(),
                    term: TermType::Fixed
                },
                &"B".into()
            )
            .unwrap(),
            ZoneId::from("Z2")
        );
        assert_eq!(
            z.resolve(
                &Destination {
                    country: "C".into(),
                    term: TermType::Fixed
                },
                &"B".into()
            )
            .unwrap(),
            ZoneId::from("Z1")
        );
        assert_eq!(
            z.resolve(
                &Destination {
                    country: "A".into(),
                    term: TermType::Mobile
                },
                &"B".into()
            )
            .unwrap(),
            ZoneId::from("Z0")
        );
    }

    #[test]
    fn wholesale_mt_defaults_to_zero() {
        let s = schedule(250_000, 30, 0);
        assert_eq!(rate_wholesale_mt(&s, &mt_call(120)).unwrap(), Money::ZERO);
        assert_eq!(rate_wholesale_mt(&s, &mt_call(0)).unwrap(), Money::ZERO);
        let mut s = schedule(250_000, 60, 0);
        s.mt_rate = Money(100_000);
        assert_eq!(rate_wholesale_mt(&s, &mt_call(90)).unwrap(), Money(200_000));
    }

    #[test]
    fn retail_markup_examples() {
        let call = mo_call("B", 60);
        let scheme = markup(Fraction::decimal(20, 2));
        assert_eq!(rate_retail_mo(&scheme, Money(1_000_000), &call).unwrap(), Money(1_200_000));
        let identity = markup(Fraction::ZERO);
        assert_eq!(rate_retail_mo(&identity, Money(987_654), &call).unwrap(), Money(987_654));
    }

    #[test]
    fn retail_single_rate_ignores_network() {
        let scheme = RetailScheme {
            variant: RetailVariant::SingleRate {
                groups: vec![RetailGroup {
                    id: "EU".into(),
                    countries: vec!["A".into()],
                    rate_micro_per_min: Money(800_000),
                }],
            },
            mt_prices: BTreeMap::new(),
        };
        let mut call = mo_call("B", 150);
        assert_eq!(rate_retail_mo(&scheme, Money(5), &call).unwrap(), Money(2_400_000));
        call.visited_operator = "A2".into();
        assert_eq!(rate_retail_mo(&scheme, Money(999_999), &call).unwrap(), Money(2_400_000));
        call.visited_country = "Z".into();
        assert!(matches!(rate_retail_mo(&scheme, Money(1), &call), Err(TariffError::MissingGroupRate { .. })));
    }

    #[test]
    fn retail_mt_examples() {
        let scheme = markup(Fraction::decimal(2, 1));
        assert_eq!(rate_retail_mt(&scheme, &mt_call(61)).unwrap(), Money(1_800_000));
        assert_eq!(rate_retail_mt(&scheme, &mt_call(0)).unwrap(), Money(900_000));
        let mut other = mt_call(61);
        other.visited_operator = "A3".into();
        assert_eq!(rate_retail_mt(&scheme, &other).unwrap(), rate_retail_mt(&scheme, &mt_call(61)).unwrap());
    }

    #[test]
    fn direction_is_checked() {
        let s = schedule(1, 30, 0);
        assert!(rate_wholesale_mt(&s, &mo_call("B", 1)).is_err());
        assert!(rate_wholesale_mo(&s, &zones(), &mt_call(1)).is_err());
    }

    #[test]
    fn aggregate_usage_is_pro_rata() {
        let s = schedule(250_000, 30, 100_000);
        let mut call = mo_call("B", 0);
        // 45 s over 0.5 calls: 0.5 × 100,000 + 1.5 × 250,000
        call.usage = Usage::Aggregate {
            seconds: BigRational::from_integer(45.into()),
            calls: BigRational::new(1.into(), 2.into()),
        };
        assert_eq!(rate_wholesale_mo(&s, &zones(), &call).unwrap(), Money(50_000 + 375_000));
    }

    #[test]
    fn headline_scaling() {
        let s = schedule(250_000, 30, 100_000);
        assert_eq!(s.headline_per_minute(), Money(500_000));
        let scaled = s.scaled_to(Money(350_000));
        assert_eq!(scaled.headline_per_minute(), Money(350_000));
        assert_eq!(scaled.setup_fee, Money(70_000));
        assert_eq!(s.scaled_to(Money(500_000)), s);
    }

    proptest! {
        #[test]
        fn wholesale_monotone_in_duration(d in 0u64..10_000, extra in 0u64..500, rate in 0i64..1_000_000, unit in prop::sample::select(vec![10u32, 30, 60])) {
            let s = schedule(rate, unit, 7);
            let a = rate_wholesale_mo(&s, &zones(), &mo_call("B", d)).unwrap();
            let b = rate_wholesale_mo(&s, &zones(), &mo_call("B", d + extra)).unwrap();
            prop_assert!(a <= b);
            // rating is a pure function
            prop_assert_eq!(a, rate_wholesale_mo(&s, &zones(), &mo_call("B", d)).unwrap());
        }

        #[test]
        fn charge_steps_at_unit_boundaries(k in 1u64..200, rate in 1i64..1_000_000, unit in prop::sample::select(vec![10u32, 30, 60])) {
            let s = schedule(rate, unit, 0);
            let at = rate_wholesale_mo(&s, &zones(), &mo_call("B", k * u64::from(unit))).unwrap();
            let past = rate_wholesale_mo(&s, &zones(), &mo_call("B", k * u64::from(unit) + 1)).unwrap();
            prop_assert!(at < past);
        }

        #[test]
        fn markup_is_half_up_linear(w in 0i64..1_000_000_000_000, m_ppb in 0i64..=1_000_000_000) {
            let m = Fraction::from_ppb(m_ppb);
            let got = rate_retail_mo(&markup(m), Money(w), &mo_call("B", 1)).unwrap();
            let exact = (i128::from(w) * i128::from(1_000_000_000 + m_ppb)) as f64 / 1e9;
            prop_assert!((got.0 as f64 - exact).abs() <= 0.5 + exact * 1e-12);
            if m_ppb == 0 { prop_assert_eq!(got, Money(w)); }
        }
    }
}
