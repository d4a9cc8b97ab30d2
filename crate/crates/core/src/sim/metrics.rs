use std::collections::BTreeMap;

use num::rational::BigRational;
use num::Zero;

use crate::ids::{CountryId, OperatorId};
use crate::money::{rational_int, rational_to_f64, Money};
use crate::scenario::Scenario;
use crate::settlement::Invoice;
use crate::tariff::{Cdr, Direction};

/// Traffic carried by one visited network in a period.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetworkTraffic {
    /// MO and MT seconds.
    pub seconds: BigRational,
    pub mo_seconds: BigRational,
    /// Retail revenue of MO calls on this network.
    pub mo_retail: Money,
}

/// Per-network traffic accumulated while settling a period.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PeriodTraffic {
    pub networks: BTreeMap<OperatorId, NetworkTraffic>,
}

impl PeriodTraffic {
    pub fn add(&mut self, cdr: &Cdr, seconds: &BigRational, retail: Money) {
        let slot = self.networks.entry(cdr.call.visited_operator.clone()).or_default();
        slot.seconds += seconds;
        if cdr.call.direction == Direction::Mo {
            slot.mo_seconds += seconds;
            slot.mo_retail += retail;
        }
    }
}

/// Market metrics of one visited network in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub period: u32,
    pub country: CountryId,
    pub operator: OperatorId,
    /// Share of the country's roamed wholesale minutes.
    pub wholesale_share: f64,
    /// Exact share, for invariance checks.
    pub share_exact: BigRational,
    /// Sum of the two largest shares in the country.
    pub cr2: f64,
    /// Retail MO revenue per MO minute; absent without MO traffic.
    pub avg_retail_per_min: Option<Money>,
    /// Average retail price over the country's non-roamed benchmark.
    pub ratio_vs_nonroamed: Option<f64>,
    pub wholesale_minutes: BigRational,
    /// Net invoiced wholesale revenue.
    pub wholesale_rev: Money,
    pub wholesale_profit: Money,
    pub min_headline_iot: Money,
    pub headline_iot: Money,
}

pub fn compute_metrics(
    scenario: &Scenario,
    period: u32,
    countries: &[CountryId],
    headlines: &BTreeMap<OperatorId, Money>,
    traffic: &PeriodTraffic,
    invoices: &[Invoice],
) -> Vec<MetricsRow> {
    let mut revenue: BTreeMap<&OperatorId, Money> = BTreeMap::new();
    for inv in invoices {
        *revenue.entry(&inv.issuer).or_default() += inv.net;
    }
    let empty = super::metrics::NetworkTraffic::default();
    let sixty = rational_int(60);
    let mut rows = Vec::new();
    for country in countries {
        let roster = &scenario.roster[country];
        let total: BigRational = roster.iter().filter_map(|op| traffic.networks.get(op)).map(|n| n.seconds.clone()).sum();
        let shares: Vec<BigRational> = roster
            .iter()
            .map(|op| {
                let s = traffic.networks.get(op).map_or_else(BigRational::zero, |n| n.seconds.clone());
                if total.is_zero() {
                    BigRational::zero()
                } else {
                    s / &total
                }
            })
            .collect();
        let mut sorted: Vec<&BigRational> = shares.iter().collect();
        sorted.sort_by(|a, b| b.cmp(a));
        let cr2: BigRational = sorted.iter().take(2).map(|s| (*s).clone()).sum();
        let min_headline = roster.iter().filter_map(|op| headlines.get(op)).min().copied().unwrap_or(Money::ZERO);
        for (op, share) in roster.iter().zip(shares) {
            let net = traffic.networks.get(op).unwrap_or(&empty);
            let avg = (!net.mo_seconds.is_zero()).then(|| net.mo_retail.to_rational() * &sixty / &net.mo_seconds);
            let ratio = match (&avg, scenario.benchmarks.get(country)) {
                (Some(a), Some(b)) => Some(rational_to_f64(&(a / b.to_rational()))),
                _ => None,
            };
            let minutes = &net.seconds / &sixty;
            let rev = revenue.get(op).copied().unwrap_or(Money::ZERO);
            let cost = Money::round_rational(&(scenario.operators[op].cost_micro_per_min.to_rational() * &minutes));
            rows.push(MetricsRow {
                period,
                country: country.clone(),
                operator: op.clone(),
                wholesale_share: rational_to_f64(&share),
                share_exact: share,
                cr2: rational_to_f64(&cr2),
                avg_retail_per_min: avg.as_ref().map(Money::round_rational),
                ratio_vs_nonroamed: ratio,
                wholesale_minutes: minutes,
                wholesale_rev: rev,
                wholesale_profit: rev - cost,
                min_headline_iot: min_headline,
                headline_iot: headlines.get(op).copied().unwrap_or(Money::ZERO),
            });
        }
    }
    rows
}
