//! Billing chains, inter-operator invoices and money conservation.
//!
//! Every rated call is materialized as a chain of directed ledger entries
//! between end customers, the home and visited mobile operators and the
//! fixed operators that carry the call across borders. Each entry records
//! the part of its amount that the payee passes on further down the chain,
//! which is what lets [`verify_conservation`] detect a missing leg.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::rational::BigRational;
use num::Zero;
use serde::{Deserialize, Serialize};

use crate::ids::{CountryId, OperatorId, Party};
use crate::money::{rational_int, round_half_up, Money};
use crate::strategy::{Affiliations, DiscountAgreement, TierError, TierKind};
use crate::tariff::{CallDescriptor, Direction, Usage};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SettlementError {
    #[error("no transit tariff for country {0}")]
    MissingTransit(CountryId),
    #[error("{0} call passed to the {1} settlement chain")]
    WrongDirection(Direction, Direction),
    #[error("ledger entry for call {call} belongs to period {found}, expected {expected}")]
    PeriodMismatch { call: u64, found: u32, expected: u32 },
    #[error("no usage recorded for call {0}")]
    UnknownCall(u64),
    #[error("discount agreement {visited} → {counterparty}: {source}")]
    OverlappingTiers {
        visited: OperatorId,
        counterparty: String,
        source: TierError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Retail,
    IotMo,
    IotMt,
    FixedTransit,
    FixedTermination,
    MtTermination,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Retail => "retail",
            Role::IotMo => "iot-mo",
            Role::IotMt => "iot-mt",
            Role::FixedTransit => "fixed-transit",
            Role::FixedTermination => "fixed-termination",
            Role::MtTermination => "mt-termination",
        })
    }
}

/// One directed money flow in a settlement chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub period: u32,
    pub call_ref: u64,
    pub payer: Party,
    pub payee: Party,
    pub role: Role,
    pub amount: Money,
    /// Part of `amount` the payee owes onward for the same call.
    pub passthrough: Money,
}

/// Per-minute fixed-network charges of one country.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedRates {
    /// Charged by the visited fixed operator for carrying a call across the border.
    pub transit_micro_per_min: Money,
    /// Charged by the fixed operator terminating a call in this country.
    pub fixed_termination_micro_per_min: Money,
    /// Charged by a mobile operator of this country for terminating a call.
    pub mobile_termination_micro_per_min: Money,
    /// Retail price a fixed caller in this country pays for an international call.
    pub international_call_micro_per_min: Money,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitTariff {
    pub countries: BTreeMap<CountryId, FixedRates>,
}

impl TransitTariff {
    pub fn rates(&self, country: &CountryId) -> Result<&FixedRates, SettlementError> {
        self.countries.get(country).ok_or_else(|| SettlementError::MissingTransit(country.clone()))
    }
}

fn per_minute(rate: Money, usage: &Usage) -> Money {
    Money::round_rational(&(rate.to_rational() * usage.billed_minutes()))
}

/// Ledger entries for an MO roamed call.
///
/// Subscriber → home operator (retail), home → visited operator (IOT),
/// visited mobile → visited fixed (transit plus recovered termination) and
/// visited fixed → destination fixed (termination). Calls to numbers in the
/// visited country have no cross-border termination leg.
pub fn settle_mo_call(
    call_ref: u64,
    period: u32,
    call: &CallDescriptor,
    iot_charge: Money,
    retail_charge: Money,
    transit: &TransitTariff,
) -> Result<Vec<LedgerEntry>, SettlementError> {
    if call.direction != Direction::Mo {
        return Err(SettlementError::WrongDirection(call.direction, Direction::Mo));
    }
    let visited = transit.rates(&call.visited_country)?;
    let transit_leg = per_minute(visited.transit_micro_per_min, &call.usage);
    let termination = match &call.destination {
        Some(d) if d.country != call.visited_country => {
            let dest = transit.rates(&d.country)?;
            Some((d.country.clone(), per_minute(dest.fixed_termination_micro_per_min, &call.usage)))
        }
        _ => None,
    };
    let recovered = termination.as_ref().map_or(Money::ZERO, |(_, m)| *m);
    let entry = |payer, payee, role, amount, passthrough| LedgerEntry {
        period,
        call_ref,
        payer,
        payee,
        role,
        amount,
        passthrough,
    };
    let home = Party::Operator(call.home_operator.clone());
    let visited_mobile = Party::Operator(call.visited_operator.clone());
    let visited_fixed = Party::Fixed(call.visited_country.clone());
    let mut entries = vec![
        entry(
            Party::Subscriber(call.home_operator.clone()),
            home.clone(),
            Role::Retail,
            retail_charge,
            iot_charge,
        ),
        entry(home, visited_mobile.clone(), Role::IotMo, iot_charge, transit_leg + recovered),
        entry(visited_mobile, visited_fixed.clone(), Role::FixedTransit, transit_leg + recovered, recovered),
    ];
    if let Some((country, amount)) = termination {
        entries.push(entry(visited_fixed, Party::Fixed(country), Role::FixedTermination, amount, Money::ZERO));
    }
    Ok(entries)
}

/// Ledger entries for an MT roamed call.
///
/// The fixed caller pays the originating fixed operator, which pays the
/// visited fixed operator transit plus the recovered mobile termination,
/// which in turn pays the visited mobile operator for termination. The
/// roamer pays the home operator the international mobile call price; an
/// MT IOT leg is added only when non-zero.
pub fn settle_mt_call(
    call_ref: u64,
    period: u32,
    call: &CallDescriptor,
    mt_iot_charge: Money,
    retail_mt_charge: Money,
    transit: &TransitTariff,
) -> Result<Vec<LedgerEntry>, SettlementError> {
    if call.direction != Direction::Mt {
        return Err(SettlementError::WrongDirection(call.direction, Direction::Mt));
    }
    let visited = transit.rates(&call.visited_country)?;
    let origin = transit.rates(&call.home_country)?;
    let termination = per_minute(visited.mobile_termination_micro_per_min, &call.usage);
    let transit_leg = per_minute(visited.transit_micro_per_min, &call.usage) + termination;
    let caller_price = per_minute(origin.international_call_micro_per_min, &call.usage);
    let entry = |payer, payee, role, amount, passthrough| LedgerEntry {
        period,
        call_ref,
        payer,
        payee,
        role,
        amount,
        passthrough,
    };
    let origin_fixed = Party::Fixed(call.home_country.clone());
    let visited_fixed = Party::Fixed(call.visited_country.clone());
    let visited_mobile = Party::Operator(call.visited_operator.clone());
    let home = Party::Operator(call.home_operator.clone());
    let mut entries = vec![
        entry(
            Party::Caller(call.home_country.clone()),
            origin_fixed.clone(),
            Role::Retail,
            caller_price,
            transit_leg,
        ),
        entry(origin_fixed, visited_fixed.clone(), Role::FixedTransit, transit_leg, termination),
        entry(visited_fixed, visited_mobile.clone(), Role::MtTermination, termination, Money::ZERO),
        entry(
            Party::Subscriber(call.home_operator.clone()),
            home.clone(),
            Role::Retail,
            retail_mt_charge,
            mt_iot_charge,
        ),
    ];
    if mt_iot_charge > Money::ZERO {
        entries.push(entry(home, visited_mobile, Role::IotMt, mt_iot_charge, Money::ZERO));
    }
    Ok(entries)
}

/// A chain where a party's onward payments differ from what it was handed to pass on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainBreak {
    pub call_ref: u64,
    pub party: Party,
    /// Pass-through amounts the party received for this call.
    pub received: Money,
    /// Amounts the party paid onward for this call.
    pub paid: Money,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConservationReport {
    pub balanced: bool,
    /// Credits minus debits per party.
    pub net_by_party: BTreeMap<Party, i128>,
    pub total_debits: i128,
    pub total_credits: i128,
    pub breaks: Vec<ChainBreak>,
    /// Entries with a negative amount or identical payer and payee.
    pub malformed: Vec<usize>,
}

impl ConservationReport {
    pub fn offenders(&self) -> BTreeSet<Party> {
        self.breaks.iter().map(|b| b.party.clone()).collect()
    }

    /// Total paid by end customers (subscribers and fixed callers).
    pub fn paid_by_customers(&self) -> i128 {
        self.net_by_party.iter().filter(|(p, _)| p.is_end_customer()).map(|(_, v)| -v).sum()
    }

    /// Total retained by operators (mobile and fixed).
    pub fn retained_by_operators(&self) -> i128 {
        self.net_by_party.iter().filter(|(p, _)| !p.is_end_customer()).map(|(_, v)| v).sum()
    }
}

/// Audits a ledger.
///
/// Balanced means: global debits equal global credits to the micro-unit,
/// what end customers paid equals what operators retained, no entry is
/// malformed, and within every call each intermediary paid onward exactly
/// the pass-through amounts it received.
pub fn verify_conservation(ledger: &[LedgerEntry]) -> ConservationReport {
    let mut net: BTreeMap<Party, i128> = BTreeMap::new();
    let mut debits = 0i128;
    let mut credits = 0i128;
    let mut malformed = Vec::new();
    let mut flows: BTreeMap<(u64, Party), (i128, i128)> = BTreeMap::new();
    for (i, e) in ledger.iter().enumerate() {
        if e.amount.is_negative() || e.passthrough.is_negative() || e.payer == e.payee {
            malformed.push(i);
        }
        let amount = i128::from(e.amount.0);
        debits += amount;
        credits += amount;
        *net.entry(e.payer.clone()).or_default() -= amount;
        *net.entry(e.payee.clone()).or_default() += amount;
        flows.entry((e.call_ref, e.payee.clone())).or_default().0 += i128::from(e.passthrough.0);
        flows.entry((e.call_ref, e.payer.clone())).or_default().1 += amount;
    }
    let breaks: Vec<ChainBreak> = flows
        .into_iter()
        .filter(|((_, party), (received, paid))| !party.is_end_customer() && received != paid)
        .map(|((call_ref, party), (received, paid))| ChainBreak {
            call_ref,
            party,
            received: Money(received as i64),
            paid: Money(paid as i64),
        })
        .collect();
    let mut report = ConservationReport {
        balanced: false,
        net_by_party: net,
        total_debits: debits,
        total_credits: credits,
        breaks,
        malformed,
    };
    report.balanced = report.total_debits == report.total_credits
        && report.paid_by_customers() == report.retained_by_operators()
        && report.breaks.is_empty()
        && report.malformed.is_empty();
    report
}

/// A periodic wholesale invoice from a visited operator to a home operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invoice {
    pub issuer: OperatorId,
    pub counterparty: OperatorId,
    pub period: u32,
    pub gross: Money,
    pub discount_applied: Money,
    pub net: Money,
    /// Whole minutes (rounded half-up) of the invoiced calls.
    pub minutes: i64,
    /// Exact invoiced seconds.
    pub seconds: BigRational,
    pub entry_refs: Vec<u64>,
}

/// Exact seconds of wholesale traffic per (visited operator, home operator).
pub type TrafficBook = BTreeMap<(OperatorId, OperatorId), BigRational>;

/// Inputs that decide which discounts an invoice qualifies for.
pub struct DiscountContext<'a> {
    pub agreements: &'a [DiscountAgreement],
    pub affiliations: &'a Affiliations,
    /// Traffic of the previous period, for growth tiers. `None` in period 0.
    pub previous: Option<&'a TrafficBook>,
    /// Whether `home` currently lists `visited` first for `visited`'s country.
    pub is_preferred: &'a dyn Fn(&OperatorId, &OperatorId) -> bool,
}

impl DiscountContext<'_> {
    /// Best discount rate (as a fraction in parts per billion) available to
    /// `home` on `visited`'s invoice given the period's traffic book.
    pub fn best_rate(&self, visited: &OperatorId, home: &OperatorId, period: u32, current: &TrafficBook) -> i64 {
        let mut best = 0i64;
        for agreement in self.agreements {
            if &agreement.visited_op != visited || agreement.active_from > period {
                continue;
            }
            if !self.affiliations.covers(&agreement.counterparty, home) {
                continue;
            }
            if agreement.requires_preferred && !(self.is_preferred)(home, visited) {
                continue;
            }
            let members = self.affiliations.members(&agreement.counterparty);
            let sum = |book: &TrafficBook| -> BigRational {
                members
                    .iter()
                    .filter_map(|m| book.get(&(visited.clone(), m.clone())))
                    .fold(BigRational::zero(), |acc, s| acc + s)
            };
            let seconds = sum(current);
            let previous = self.previous.map(sum);
            for tier in &agreement.tiers {
                if tier.rate.ppb() > best && tier_qualifies(tier.kind, tier.threshold, &seconds, previous.as_ref()) {
                    best = tier.rate.ppb();
                }
            }
        }
        best
    }
}

/// Whether traffic of `seconds` (and `previous` seconds one period before) meets a tier threshold.
pub fn tier_qualifies(kind: TierKind, threshold: crate::money::Fraction, seconds: &BigRational, previous: Option<&BigRational>) -> bool {
    match kind {
        TierKind::Volume => seconds / rational_int(60) >= threshold.to_rational(),
        TierKind::Growth => match previous {
            Some(prev) if !prev.is_zero() => (seconds - prev) / prev >= threshold.to_rational(),
            _ => false,
        },
    }
}

/// Aggregates a period's IOT entries into invoices and applies the best qualifying discount.
///
/// `usage` gives the exact seconds of every call referenced by the ledger.
/// Eligibility for group or broker agreements is evaluated on the combined
/// traffic of all members.
pub fn build_invoices(
    ledger: &[LedgerEntry],
    usage: &BTreeMap<u64, BigRational>,
    period: u32,
    discounts: &DiscountContext<'_>,
) -> Result<Vec<Invoice>, SettlementError> {
    for agreement in discounts.agreements {
        crate::strategy::validate_tiers(&agreement.tiers).map_err(|source| SettlementError::OverlappingTiers {
            visited: agreement.visited_op.clone(),
            counterparty: agreement.counterparty.to_string(),
            source,
        })?;
    }
    struct Acc {
        gross: Money,
        seconds: BigRational,
        refs: BTreeSet<u64>,
    }
    let mut acc: BTreeMap<(OperatorId, OperatorId), Acc> = BTreeMap::new();
    for e in ledger {
        if !matches!(e.role, Role::IotMo | Role::IotMt) {
            continue;
        }
        if e.period != period {
            return Err(SettlementError::PeriodMismatch {
                call: e.call_ref,
                found: e.period,
                expected: period,
            });
        }
        let (Party::Operator(home), Party::Operator(visited)) = (&e.payer, &e.payee) else {
            continue;
        };
        let seconds = usage.get(&e.call_ref).ok_or(SettlementError::UnknownCall(e.call_ref))?;
        let slot = acc.entry((visited.clone(), home.clone())).or_insert_with(|| Acc {
            gross: Money::ZERO,
            seconds: BigRational::zero(),
            refs: BTreeSet::new(),
        });
        slot.gross += e.amount;
        if slot.refs.insert(e.call_ref) {
            slot.seconds += seconds;
        }
    }
    let book: TrafficBook = acc.iter().map(|(k, a)| (k.clone(), a.seconds.clone())).collect();
    let mut invoices = Vec::with_capacity(acc.len());
    for ((visited, home), a) in acc {
        let rate = discounts.best_rate(&visited, &home, period, &book);
        let discount = crate::money::Fraction::from_ppb(rate).of(a.gross).min(a.gross);
        let minutes = round_half_up(&(&a.seconds / rational_int(60)));
        invoices.push(Invoice {
            issuer: visited,
            counterparty: home,
            period,
            gross: a.gross,
            discount_applied: discount,
            net: a.gross - discount,
            minutes: i64::try_from(minutes).unwrap_or(i64::MAX),
            seconds: a.seconds,
            entry_refs: a.refs.into_iter().collect(),
        });
    }
    Ok(invoices)
}
