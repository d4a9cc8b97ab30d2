//! Operator decisions: headline IOT setting, discount offers for preferred
//! status, their evaluation by home operators, and non-discrimination.
//!
//! Every decision reads a view of the previous period. List IOTs are public
//! through the InfoCentre; discount agreements are confidential and never
//! appear in a view.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::demand::{roaming_volume, DemandParams};
use crate::ids::{AggregatorId, CountryId, OperatorId};
use crate::money::{Fraction, Money};
use crate::selection::{expected_shares, with_head, SelectionError, SimProfile, VisitedNetwork};
use crate::tariff::{RetailScheme, TariffError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TierError {
    #[error("no tiers")]
    Empty,
    #[error("tier {index}: rate must lie in [0, 1)")]
    RateOutOfRange { index: usize },
    #[error("tier {index}: threshold must not be negative")]
    NegativeThreshold { index: usize },
    #[error("tier {index}: threshold does not exceed the previous {kind} tier")]
    Overlapping { index: usize, kind: TierKind },
}

#[derive(Debug, thiserror::Error)]
pub enum StrategyError {
    #[error("invalid tiers: {0}")]
    InvalidTiers(#[from] TierError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Tariff(#[from] TariffError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TierKind {
    /// Threshold in minutes of the current period.
    Volume,
    /// Threshold as growth over the previous period's minutes.
    Growth,
}

impl fmt::Display for TierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TierKind::Volume => "volume",
            TierKind::Growth => "growth",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tier {
    pub kind: TierKind,
    pub threshold: Fraction,
    pub rate: Fraction,
}

/// Tiers must be non-empty, with rates in [0, 1) and strictly increasing thresholds within each kind.
pub fn validate_tiers(tiers: &[Tier]) -> Result<(), TierError> {
    if tiers.is_empty() {
        return Err(TierError::Empty);
    }
    let mut last: BTreeMap<TierKind, Fraction> = BTreeMap::new();
    for (index, t) in tiers.iter().enumerate() {
        if t.rate < Fraction::ZERO || t.rate >= Fraction::ONE {
            return Err(TierError::RateOutOfRange { index });
        }
        if t.threshold < Fraction::ZERO {
            return Err(TierError::NegativeThreshold { index });
        }
        if let Some(prev) = last.insert(t.kind, t.threshold) {
            if t.threshold <= prev {
                return Err(TierError::Overlapping { index, kind: t.kind });
            }
        }
    }
    Ok(())
}

/// Who holds a discount agreement on the home side.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Counterparty {
    Operator(OperatorId),
    Group(AggregatorId),
    Broker(AggregatorId),
}

impl fmt::Display for Counterparty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Counterparty::Operator(op) => write!(f, "{op}"),
            Counterparty::Group(g) | Counterparty::Broker(g) => write!(f, "{g}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorGroup {
    pub id: AggregatorId,
    pub members: Vec<OperatorId>,
}

/// Group memberships and broker clients.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Affiliations {
    groups: BTreeMap<AggregatorId, Vec<OperatorId>>,
    brokers: BTreeMap<AggregatorId, Vec<OperatorId>>,
}

impl Affiliations {
    pub fn add_group(&mut self, id: AggregatorId, members: Vec<OperatorId>) {
        self.groups.insert(id, members);
    }

    pub fn add_broker(&mut self, id: AggregatorId, clients: Vec<OperatorId>) {
        self.brokers.insert(id, clients);
    }

    pub fn groups(&self) -> impl Iterator<Item = OperatorGroup> + '_ {
        self.groups.iter().map(|(id, members)| OperatorGroup {
            id: id.clone(),
            members: members.clone(),
        })
    }

    pub fn group_of(&self, op: &OperatorId) -> Option<&AggregatorId> {
        self.groups.iter().find(|(_, m)| m.contains(op)).map(|(g, _)| g)
    }

    pub fn brokers_of<'a>(&'a self, op: &'a OperatorId) -> impl Iterator<Item = &'a AggregatorId> + 'a {
        self.brokers.iter().filter(move |(_, c)| c.contains(op)).map(|(b, _)| b)
    }

    /// Whether an agreement held by `counterparty` applies to `op`'s traffic.
    pub fn covers(&self, counterparty: &Counterparty, op: &OperatorId) -> bool {
        match counterparty {
            Counterparty::Operator(o) => o == op,
            Counterparty::Group(g) => self.groups.get(g).is_some_and(|m| m.contains(op)),
            Counterparty::Broker(b) => self.brokers.get(b).is_some_and(|c| c.contains(op)),
        }
    }

    /// Operators whose traffic counts toward `counterparty`'s thresholds.
    pub fn members(&self, counterparty: &Counterparty) -> Vec<OperatorId> {
        match counterparty {
            Counterparty::Operator(o) => vec![o.clone()],
            Counterparty::Group(g) => self.groups.get(g).cloned().unwrap_or_default(),
            Counterparty::Broker(b) => self.brokers.get(b).cloned().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscountAgreement {
    pub visited_op: OperatorId,
    pub counterparty: Counterparty,
    pub tiers: Vec<Tier>,
    pub requires_preferred: bool,
    pub active_from: u32,
}

impl DiscountAgreement {
    pub fn max_rate(&self) -> Fraction {
        self.tiers.iter().map(|t| t.rate).max().unwrap_or(Fraction::ZERO)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Decision {
    Propose,
    Accept,
    Reject,
    /// Extended to another partner under non-discrimination.
    Extend,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Propose => "propose",
            Decision::Accept => "accept",
            Decision::Reject => "reject",
            Decision::Extend => "extend",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegotiationEvent {
    pub period: u32,
    pub visited_op: OperatorId,
    pub counterparty: Counterparty,
    pub decision: Decision,
    pub tier_rate: Fraction,
    pub requires_preferred: bool,
}

impl NegotiationEvent {
    fn of(period: u32, a: &DiscountAgreement, decision: Decision) -> Self {
        NegotiationEvent {
            period,
            visited_op: a.visited_op.clone(),
            counterparty: a.counterparty.clone(),
            decision,
            tier_rate: a.max_rate(),
            requires_preferred: a.requires_preferred,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum IotPolicy {
    /// Keep the current headline.
    Hold,
    /// Price `delta` below the cheapest rival, never below `floor`.
    Undercut { delta: Fraction, floor_micro: Money },
    /// Pick the grid level with the highest predicted wholesale profit.
    BestResponse { grid_micro: Vec<Money>, cost_micro: Money },
}

impl IotPolicy {
    pub fn validate(&self, cost: Money) -> Result<(), String> {
        match self {
            IotPolicy::Hold => Ok(()),
            IotPolicy::Undercut { delta, floor_micro } => {
                if *delta < Fraction::ZERO || *delta >= Fraction::ONE {
                    return Err("delta must lie in [0, 1)".into());
                }
                if *floor_micro < cost {
                    return Err(format!("floor {floor_micro} is below cost {cost}"));
                }
                Ok(())
            }
            IotPolicy::BestResponse { grid_micro, .. } => {
                if grid_micro.is_empty() {
                    return Err("grid is empty".into());
                }
                if grid_micro.windows(2).any(|w| w[0] >= w[1]) {
                    return Err("grid must be strictly increasing".into());
                }
                Ok(())
            }
        }
    }
}

/// Headline IOT levels published through the InfoCentre, one entry per period.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IotHistory {
    initial: BTreeMap<OperatorId, Money>,
    periods: Vec<BTreeMap<OperatorId, Money>>,
}

impl IotHistory {
    pub fn new(initial: BTreeMap<OperatorId, Money>) -> Self {
        IotHistory { initial, periods: Vec::new() }
    }

    /// Records the levels in force during the next period.
    pub fn record(&mut self, levels: BTreeMap<OperatorId, Money>) {
        self.periods.push(levels);
    }

    pub fn levels_at(&self, period: u32) -> &BTreeMap<OperatorId, Money> {
        self.periods.get(period as usize).unwrap_or(&self.initial)
    }
}

/// What one operator can see at the start of a period: every headline as of the previous period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoCentreView {
    pub observer: OperatorId,
    pub period: u32,
    pub levels: BTreeMap<OperatorId, Money>,
}

pub fn observe_iots(history: &IotHistory, observer: &OperatorId, period: u32) -> InfoCentreView {
    let levels = match period.checked_sub(1) {
        Some(prev) => history.levels_at(prev).clone(),
        None => history.initial.clone(),
    };
    InfoCentreView {
        observer: observer.clone(),
        period,
        levels,
    }
}

/// One home operator's subscribers visiting a country, as used for predictions.
#[derive(Debug, Clone)]
pub struct OutlookCohort<'a> {
    pub profile: &'a SimProfile,
    pub retail: &'a RetailScheme,
    pub demand: &'a DemandParams,
    /// Whether the home operator can steer, in which case it is assumed to head its list with the cheapest network.
    pub steering: bool,
}

/// The demand side of one visited country, for predicting minutes under hypothetical IOT levels.
#[derive(Debug, Clone)]
pub struct Outlook<'a> {
    pub country: CountryId,
    pub networks: Vec<VisitedNetwork>,
    pub cohorts: Vec<OutlookCohort<'a>>,
}

impl Outlook<'_> {
    /// Predicted MO minutes attaching to `op` when headlines are `levels`.
    pub fn predicted_mo_minutes(&self, levels: &BTreeMap<OperatorId, Money>, op: &OperatorId) -> Result<f64, StrategyError> {
        let mut total = 0.0;
        for cohort in &self.cohorts {
            let mut prices = BTreeMap::new();
            for n in &self.networks {
                let level = levels.get(&n.operator).copied().unwrap_or(Money::ZERO);
                prices.insert(n.operator.clone(), cohort.retail.price_per_minute(&self.country, level)?);
            }
            let steered;
            let profile = if cohort.steering {
                steered = steer_to_cheapest(cohort.profile, &self.country, levels);
                &steered
            } else {
                cohort.profile
            };
            let shares = expected_shares(profile, &self.country, &self.networks, &prices)?;
            let covered = shares.total();
            if covered <= 0.0 {
                continue;
            }
            let weighted: f64 = shares.entries.iter().map(|(o, s)| s * prices[o].0 as f64).sum();
            let perceived = Money((weighted / covered).round() as i64);
            let volume = roaming_volume(cohort.demand, perceived) as f64;
            total += volume * cohort.demand.mt_ratio.complement().to_f64() * shares.get(op);
        }
        Ok(total)
    }
}

/// The profile with the lowest-level listed network moved to the head; ties keep the current head.
fn steer_to_cheapest(profile: &SimProfile, country: &CountryId, levels: &BTreeMap<OperatorId, Money>) -> SimProfile {
    let list = profile.list(country);
    let level = |op: &OperatorId| levels.get(op).copied().unwrap_or(Money(i64::MAX));
    let mut best: Option<&OperatorId> = None;
    for op in list {
        if best.is_none_or(|b| level(op) < level(b)) {
            best = Some(op);
        }
    }
    let mut out = profile.clone();
    if let Some(b) = best {
        out.preferred.insert(country.clone(), with_head(list, b));
    }
    out
}

/// What an operator knows about itself when setting its headline.
pub struct OwnState<'a> {
    pub operator: &'a OperatorId,
    pub current: Money,
    /// Other operators licensed in the same country.
    pub rivals: &'a [OperatorId],
    /// Whether some foreign home operator can currently steer traffic.
    pub steering_open: bool,
    pub outlook: Option<&'a Outlook<'a>>,
}

/// The next headline IOT level per minute.
///
/// Undercutting only pays once home operators can steer toward cheaper
/// networks, so an undercutter holds while steering is closed.
pub fn decide_iot(policy: &IotPolicy, view: &InfoCentreView, own: &OwnState<'_>) -> Result<Money, StrategyError> {
    match policy {
        IotPolicy::Hold => Ok(own.current),
        IotPolicy::Undercut { delta, floor_micro } => {
            if !own.steering_open {
                return Ok(own.current);
            }
            let min_rival = own.rivals.iter().filter_map(|r| view.levels.get(r)).min();
            Ok(match min_rival {
                Some(m) => delta.one_minus_of(*m).max(*floor_micro),
                None => own.current,
            })
        }
        IotPolicy::BestResponse { grid_micro, cost_micro } => {
            let Some(outlook) = own.outlook else {
                return Ok(own.current);
            };
            let mut levels = view.levels.clone();
            let mut best: Option<(Money, f64)> = None;
            for level in grid_micro {
                levels.insert(own.operator.clone(), *level);
                let minutes = outlook.predicted_mo_minutes(&levels, own.operator)?;
                let profit = (level.0 - cost_micro.0) as f64 * minutes;
                if best.is_none_or(|(_, p)| profit > p) {
                    best = Some((*level, profit));
                }
            }
            Ok(best.map_or(own.current, |(l, _)| l))
        }
    }
}

/// Creates an offer of discount tiers in exchange for preferred status and logs it.
pub fn propose_discount(
    visited_op: &OperatorId,
    counterparty: Counterparty,
    tiers: Vec<Tier>,
    period: u32,
    log: &mut Vec<NegotiationEvent>,
) -> Result<DiscountAgreement, StrategyError> {
    validate_tiers(&tiers)?;
    let offer = DiscountAgreement {
        visited_op: visited_op.clone(),
        counterparty,
        tiers,
        requires_preferred: true,
        active_from: period,
    };
    log.push(NegotiationEvent::of(period, &offer, Decision::Propose));
    Ok(offer)
}

/// A home operator's cohort in the country of an offer.
#[derive(Debug, Clone)]
pub struct PredictedCohort<'a> {
    pub profile: &'a SimProfile,
    /// Predicted MO minutes of the whole cohort next period.
    pub minutes: f64,
}

/// What a home operator consults when evaluating an offer.
pub struct OfferMarket<'a> {
    pub country: &'a CountryId,
    pub networks: &'a [VisitedNetwork],
    /// Headline levels from the evaluator's view.
    pub levels: &'a BTreeMap<OperatorId, Money>,
    /// Cohorts in `country`, by home operator.
    pub cohorts: &'a BTreeMap<OperatorId, PredictedCohort<'a>>,
    /// Agreements already in force.
    pub existing: &'a [DiscountAgreement],
    pub affiliations: &'a Affiliations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfferDecision {
    pub accept: bool,
    /// Predicted wholesale cost per period without the offer.
    pub status_quo_cost: f64,
    /// Predicted wholesale cost per period with the offer and the offerer at the head.
    pub offered_cost: f64,
    /// The preferred list to program on acceptance, when it changes.
    pub new_list: Option<Vec<OperatorId>>,
}

impl OfferMarket<'_> {
    fn shares(&self, profile: &SimProfile) -> Result<BTreeMap<OperatorId, f64>, StrategyError> {
        // automatic selection ignores prices; manual selectors compare headlines
        let prices: BTreeMap<OperatorId, Money> = self
            .networks
            .iter()
            .map(|n| (n.operator.clone(), self.levels.get(&n.operator).copied().unwrap_or(Money::ZERO)))
            .collect();
        Ok(expected_shares(profile, self.country, self.networks, &prices)?.entries.into_iter().collect())
    }

    /// Predicted cost for `home` if every cohort in `lists` uses the given list in this country.
    fn cost(&self, home: &OperatorId, lists: &BTreeMap<OperatorId, Vec<OperatorId>>, agreements: &[&DiscountAgreement]) -> Result<f64, StrategyError> {
        let mut shares_by_home = BTreeMap::new();
        for (op, cohort) in self.cohorts {
            let mut profile = cohort.profile.clone();
            if let Some(list) = lists.get(op) {
                profile.preferred.insert(self.country.clone(), list.clone());
            }
            shares_by_home.insert(op.clone(), (profile.head(self.country).cloned(), self.shares(&profile)?));
        }
        let Some((_, own_shares)) = shares_by_home.get(home) else {
            return Ok(0.0);
        };
        let own_minutes = self.cohorts[home].minutes;
        let mut cost = 0.0;
        for n in self.networks {
            let share = own_shares.get(&n.operator).copied().unwrap_or(0.0);
            if share <= 0.0 {
                continue;
            }
            let level = self.levels.get(&n.operator).copied().unwrap_or(Money::ZERO).0 as f64;
            let mut rate = 0.0f64;
            for a in agreements
                .iter()
                .filter(|a| a.visited_op == n.operator && self.affiliations.covers(&a.counterparty, home))
            {
                if a.requires_preferred && shares_by_home[home].0.as_ref() != Some(&n.operator) {
                    continue;
                }
                let pooled: f64 = self
                    .affiliations
                    .members(&a.counterparty)
                    .iter()
                    .filter_map(|m| {
                        shares_by_home
                            .get(m)
                            .map(|(_, s)| self.cohorts[m].minutes * s.get(&n.operator).copied().unwrap_or(0.0))
                    })
                    .sum();
                for t in a.tiers.iter().filter(|t| t.kind == TierKind::Volume && pooled >= t.threshold.to_f64()) {
                    rate = rate.max(t.rate.to_f64());
                }
            }
            cost += own_minutes * share * level * (1.0 - rate);
        }
        Ok(cost)
    }
}

/// Accepts an offer iff steering is available and it strictly lowers predicted wholesale cost.
///
/// Costs are compared at the cohort's predicted volume with shares from
/// network selection. With the offer, every member of the offer's
/// counterparty is assumed to head its list with the offering network, so
/// group and broker thresholds are tested against pooled minutes. Growth
/// tiers are not counted on in the prediction.
pub fn evaluate_offer(home_op: &OperatorId, offer: &DiscountAgreement, steering: bool, market: &OfferMarket<'_>) -> Result<OfferDecision, StrategyError> {
    let current: BTreeMap<OperatorId, Vec<OperatorId>> = BTreeMap::new();
    let existing: Vec<&DiscountAgreement> = market.existing.iter().collect();
    let status_quo_cost = market.cost(home_op, &current, &existing)?;
    let mut lists = BTreeMap::new();
    for m in market
        .affiliations
        .members(&offer.counterparty)
        .into_iter()
        .chain(std::iter::once(home_op.clone()))
    {
        if let Some(c) = market.cohorts.get(&m) {
            lists.insert(m, with_head(c.profile.list(market.country), &offer.visited_op));
        }
    }
    let mut with_offer = existing.clone();
    with_offer.push(offer);
    let offered_cost = market.cost(home_op, &lists, &with_offer)?;
    let accept = steering && offered_cost < status_quo_cost;
    let new_list = lists
        .remove(home_op)
        .filter(|l| market.cohorts.get(home_op).is_some_and(|c| c.profile.list(market.country) != l.as_slice()));
    Ok(OfferDecision {
        accept,
        status_quo_cost,
        offered_cost,
        new_list: if accept { new_list } else { None },
    })
}

/// Records an evaluation in the negotiation log.
pub fn log_decision(period: u32, offer: &DiscountAgreement, accept: bool, log: &mut Vec<NegotiationEvent>) {
    log.push(NegotiationEvent::of(period, offer, if accept { Decision::Accept } else { Decision::Reject }));
}

/// Extends every accepted agreement to all partners of the same visited operator when `flag` is on.
///
/// Extensions keep the original tiers, apply from `active_from`, and are
/// logged. Partners that already hold an identical agreement are skipped.
pub fn enforce_nondiscrimination(
    agreements: &[DiscountAgreement],
    flag: bool,
    partners: &BTreeMap<OperatorId, Vec<Counterparty>>,
    active_from: u32,
    log: &mut Vec<NegotiationEvent>,
) -> Vec<DiscountAgreement> {
    let mut out = agreements.to_vec();
    if !flag {
        return out;
    }
    type Held = (OperatorId, Counterparty, Vec<(TierKind, Fraction, Fraction)>);
    let mut held: BTreeSet<Held> = BTreeSet::new();
    let key = |a: &DiscountAgreement| a.tiers.iter().map(|t| (t.kind, t.threshold, t.rate)).collect::<Vec<_>>();
    for a in agreements {
        held.insert((a.visited_op.clone(), a.counterparty.clone(), key(a)));
    }
    for a in agreements {
        for p in partners.get(&a.visited_op).into_iter().flatten() {
            if held.insert((a.visited_op.clone(), p.clone(), key(a))) {
                let ext = DiscountAgreement {
                    counterparty: p.clone(),
                    active_from: active_from.max(a.active_from),
                    ..a.clone()
                };
                log.push(NegotiationEvent::of(active_from, &ext, Decision::Extend));
                out.push(ext);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::DestinationWeight;
    use crate::selection::Band;
    use crate::tariff::{RetailVariant, TermType};
    use proptest::prelude::*;

    fn levels(pairs: &[(&str, i64)]) -> BTreeMap<OperatorId, Money> {
        pairs.iter().map(|(o, l)| (OperatorId::from(*o), Money(*l))).collect()
    }

    fn volume(min: i64, pct: i64) -> Tier {
        Tier {
            kind: TierKind::Volume,
            threshold: Fraction::decimal(min, 0),
            rate: Fraction::decimal(pct, 2),
        }
    }

    #[test]
    fn views_lag_one_period() {
        let mut h = IotHistory::new(levels(&[("A1", 1_000), ("A2", 1_000)]));
        h.record(levels(&[("A1", 1_000), ("A2", 1_000)]));
        // A2 cuts during period 1
        h.record(levels(&[("A1", 1_000), ("A2", 800)]));
        let me = OperatorId::from("A1");
        assert_eq!(observe_iots(&h, &me, 0).levels, levels(&[("A1", 1_000), ("A2", 1_000)]));
        assert_eq!(observe_iots(&h, &me, 1).levels[&OperatorId::from("A2")], Money(1_000));
        assert_eq!(observe_iots(&h, &me, 2).levels[&OperatorId::from("A2")], Money(800));
    }

    #[test]
    fn unchanged_history_shows_initial_levels() {
        let init = levels(&[("A1", 7), ("B1", 9)]);
        let mut h = IotHistory::new(init.clone());
        for _ in 0..5 {
            h.record(init.clone());
        }
        assert_eq!(observe_iots(&h, &"B1".into(), 4).levels, init);
    }

    fn own<'a>(op: &'a OperatorId, rivals: &'a [OperatorId], steering_open: bool) -> OwnState<'a> {
        OwnState {
            operator: op,
            current: Money(1_200_000),
            rivals,
            steering_open,
            outlook: None,
        }
    }

    #[test]
    fn undercut_example() {
        let policy = IotPolicy::Undercut {
            delta: Fraction::decimal(1, 1),
            floor_micro: Money(500_000),
        };
        let view = InfoCentreView {
            observer: "A2".into(),
            period: 3,
            levels: levels(&[("A1", 1_000_000), ("A2", 1_200_000), ("A3", 1_100_000)]),
        };
        let (me, rivals) = (OperatorId::from("A2"), vec![OperatorId::from("A1"), OperatorId::from("A3")]);
        assert_eq!(decide_iot(&policy, &view, &own(&me, &rivals, true)).unwrap(), Money(900_000));
        // floor binds
        let cheap = InfoCentreView {
            levels: levels(&[("A1", 520_000), ("A2", 1_200_000)]),
            ..view.clone()
        };
        assert_eq!(decide_iot(&policy, &cheap, &own(&me, &rivals, true)).unwrap(), Money(500_000));
        // no steering anywhere: hold
        assert_eq!(decide_iot(&policy, &view, &own(&me, &rivals, false)).unwrap(), Money(1_200_000));
    }

    #[test]
    fn hold_is_identity() {
        let view = InfoCentreView {
            observer: "A1".into(),
            period: 0,
            levels: levels(&[("A2", 1)]),
        };
        let me = OperatorId::from("A1");
        let rivals = [OperatorId::from("A2")];
        assert_eq!(decide_iot(&IotPolicy::Hold, &view, &own(&me, &rivals, true)).unwrap(), Money(1_200_000));
    }

    #[test]
    fn policy_validation() {
        assert!(IotPolicy::Undercut {
            delta: Fraction::ONE,
            floor_micro: Money(1)
        }
        .validate(Money(0))
        .is_err());
        assert!(IotPolicy::Undercut {
            delta: Fraction::ZERO,
            floor_micro: Money(1)
        }
        .validate(Money(2))
        .is_err());
        assert!(IotPolicy::BestResponse {
            grid_micro: vec![],
            cost_micro: Money(0)
        }
        .validate(Money(0))
        .is_err());
        assert!(IotPolicy::BestResponse {
            grid_micro: vec![Money(2), Money(2)],
            cost_micro: Money(0)
        }
        .validate(Money(0))
        .is_err());
        assert!(IotPolicy::BestResponse {
            grid_micro: vec![Money(1), Money(2)],
            cost_micro: Money(0)
        }
        .validate(Money(0))
        .is_ok());
    }

    #[test]
    fn tiers_validation() {
        assert_eq!(validate_tiers(&[]), Err(TierError::Empty));
        assert!(validate_tiers(&[volume(500, 20)]).is_ok());
        assert!(validate_tiers(&[volume(100, 10), volume(500, 20)]).is_ok());
        assert!(matches!(
            validate_tiers(&[volume(100, 10), volume(100, 20)]),
            Err(TierError::Overlapping { index: 1, .. })
        ));
        assert!(matches!(
            validate_tiers(&[volume(500, 10), volume(100, 20)]),
            Err(TierError::Overlapping { .. })
        ));
        assert_eq!(validate_tiers(&[volume(1, 100)]), Err(TierError::RateOutOfRange { index: 0 }));
        let growth = Tier {
            kind: TierKind::Growth,
            threshold: Fraction::decimal(1, 1),
            rate: Fraction::decimal(5, 2),
        };
        assert!(validate_tiers(&[volume(100, 10), growth]).is_ok());
    }

    #[test]
    fn proposals_are_logged() {
        let mut log = Vec::new();
        let offer = propose_discount(&"A2".into(), Counterparty::Operator("B1".into()), vec![volume(500, 20)], 4, &mut log).unwrap();
        assert!(offer.requires_preferred);
        assert_eq!(offer.active_from, 4);
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].decision, Decision::Propose);
        assert_eq!(log[0].tier_rate, Fraction::decimal(2, 1));
        assert!(matches!(
            propose_discount(&"A2".into(), Counterparty::Operator("B1".into()), vec![], 4, &mut log),
            Err(StrategyError::InvalidTiers(TierError::Empty))
        ));
        assert_eq!(log.len(), 1);
    }

    fn nets(cov1: i64, cov2: i64) -> Vec<VisitedNetwork> {
        vec![
            VisitedNetwork {
                operator: "A1".into(),
                band: Band::Gsm900,
                coverage: Fraction::decimal(cov1, 1),
            },
            VisitedNetwork {
                operator: "A2".into(),
                band: Band::Gsm900,
                coverage: Fraction::decimal(cov2, 1),
            },
        ]
    }

    fn profile(home: &str, list: &[&str]) -> SimProfile {
        SimProfile {
            home_operator: home.into(),
            preferred: BTreeMap::from([("A".into(), list.iter().map(|o| OperatorId::from(*o)).collect())]),
            handset_band_mix: Fraction::ONE,
            manual_propensity: Fraction::ZERO,
        }
    }

    struct Market {
        networks: Vec<VisitedNetwork>,
        levels: BTreeMap<OperatorId, Money>,
        profiles: BTreeMap<OperatorId, SimProfile>,
        minutes: f64,
        affiliations: Affiliations,
    }

    impl Market {
        fn new(networks: Vec<VisitedNetwork>, levels: BTreeMap<OperatorId, Money>) -> Self {
            let profiles = BTreeMap::from([("B1".into(), profile("B1", &["A1", "A2"])), ("C1".into(), profile("C1", &["A1", "A2"]))]);
            let mut affiliations = Affiliations::default();
            affiliations.add_group("G".into(), vec!["B1".into(), "C1".into()]);
            Market {
                networks,
                levels,
                profiles,
                minutes: 1_000.0,
                affiliations,
            }
        }

        fn evaluate(&self, home: &str, offer: &DiscountAgreement, steering: bool) -> OfferDecision {
            let cohorts: BTreeMap<OperatorId, PredictedCohort<'_>> = self
                .profiles
                .iter()
                .map(|(o, p)| {
                    (
                        o.clone(),
                        PredictedCohort {
                            profile: p,
                            minutes: self.minutes,
                        },
                    )
                })
                .collect();
            let market = OfferMarket {
                country: &"A".into(),
                networks: &self.networks,
                levels: &self.levels,
                cohorts: &cohorts,
                existing: &[],
                affiliations: &self.affiliations,
            };
            evaluate_offer(&home.into(), offer, steering, &market).unwrap()
        }
    }

    fn offer(counterparty: Counterparty, tiers: Vec<Tier>) -> DiscountAgreement {
        DiscountAgreement {
            visited_op: "A2".into(),
            counterparty,
            tiers,
            requires_preferred: true,
            active_from: 0,
        }
    }

    #[test]
    fn offers_rejected_without_steering() {
        let m = Market::new(nets(9, 9), levels(&[("A1", 1_000_000), ("A2", 1_000_000)]));
        let d = m.evaluate("B1", &offer(Counterparty::Operator("B1".into()), vec![volume(0, 90)]), false);
        assert!(!d.accept);
        assert!(d.offered_cost < d.status_quo_cost);
        assert_eq!(d.new_list, None);
    }

    #[test]
    fn cheaper_effective_iot_is_accepted_with_head_swap() {
        // equal coverage 0.9: head 0.905, other 0.095
        let m = Market::new(nets(9, 9), levels(&[("A1", 1_000_000), ("A2", 1_000_000)]));
        let d = m.evaluate("B1", &offer(Counterparty::Operator("B1".into()), vec![volume(500, 20)]), true);
        assert!(d.accept);
        assert_eq!(d.new_list, Some(vec!["A2".into(), "A1".into()]));
        // status quo: all minutes at 1,000,000 per minute
        assert!((d.status_quo_cost - 1_000.0 * 1_000_000.0).abs() < 1e-3);
        let expected = 1_000.0 * (0.095 * 1_000_000.0 + 0.905 * 800_000.0);
        assert!((d.offered_cost - expected).abs() < 1e-3);
    }

    #[test]
    fn no_cost_change_is_rejected() {
        let m = Market::new(nets(9, 9), levels(&[("A1", 1_000_000), ("A2", 1_000_000)]));
        let d = m.evaluate("B1", &offer(Counterparty::Operator("B1".into()), vec![volume(0, 0)]), true);
        assert!(!d.accept);
        // threshold out of reach for one operator
        let d = m.evaluate("B1", &offer(Counterparty::Operator("B1".into()), vec![volume(1_500, 30)]), true);
        assert!(!d.accept);
    }

    #[test]
    fn group_offers_pool_member_minutes() {
        let m = Market::new(nets(9, 9), levels(&[("A1", 1_000_000), ("A2", 1_000_000)]));
        // 905 minutes each at the head, 1,810 pooled
        let d = m.evaluate("B1", &offer(Counterparty::Group("G".into()), vec![volume(1_500, 30)]), true);
        assert!(d.accept);
    }

    #[test]
    fn acceptance_strictly_lowers_predicted_cost() {
        let m = Market::new(nets(9, 6), levels(&[("A1", 900_000), ("A2", 1_000_000)]));
        for pct in 0..60 {
            let d = m.evaluate("B1", &offer(Counterparty::Operator("B1".into()), vec![volume(100, pct)]), true);
            if d.accept {
                assert!(d.offered_cost < d.status_quo_cost);
            }
        }
    }

    #[test]
    fn nondiscrimination_extends_tiers() {
        let accepted = vec![offer(Counterparty::Operator("B1".into()), vec![volume(500, 15)])];
        let partners = BTreeMap::from([(
            OperatorId::from("A2"),
            vec![
                Counterparty::Operator("B1".into()),
                Counterparty::Operator("C1".into()),
                Counterparty::Broker("K".into()),
            ],
        )]);
        let mut log = Vec::new();
        assert_eq!(enforce_nondiscrimination(&accepted, false, &partners, 5, &mut log), accepted);
        assert!(log.is_empty());
        let out = enforce_nondiscrimination(&accepted, true, &partners, 5, &mut log);
        assert_eq!(out.len(), 3);
        assert!(out[1..].iter().all(|a| a.tiers == accepted[0].tiers && a.active_from == 5));
        assert_eq!(out[2].counterparty, Counterparty::Broker("K".into()));
        assert_eq!(log.iter().filter(|e| e.decision == Decision::Extend).count(), 2);
        // idempotent
        let again = enforce_nondiscrimination(&out, true, &partners, 6, &mut log);
        assert_eq!(again.len(), 3);
    }

    #[test]
    fn affiliation_coverage() {
        let mut a = Affiliations::default();
        a.add_group("G".into(), vec!["B1".into(), "C1".into()]);
        a.add_broker("K".into(), vec!["B2".into()]);
        assert!(a.covers(&Counterparty::Group("G".into()), &"C1".into()));
        assert!(!a.covers(&Counterparty::Group("G".into()), &"B2".into()));
        assert!(a.covers(&Counterparty::Broker("K".into()), &"B2".into()));
        assert_eq!(a.group_of(&"B1".into()), Some(&AggregatorId::from("G")));
        assert_eq!(a.members(&Counterparty::Operator("X".into())), vec![OperatorId::from("X")]);
    }

    fn demand(eps: i64) -> DemandParams {
        DemandParams {
            base_minutes: 10_000,
            reference_price: Money(1_000_000),
            elasticity: Fraction::decimal(eps, 0),
            mt_ratio: Fraction::ZERO,
            substitution_share: Fraction::ZERO,
            call_duration_mean_s: 120,
            peak_fraction: Fraction::ONE,
            destination_mix: vec![DestinationWeight {
                country: "B".into(),
                term: TermType::Fixed,
                weight: Fraction::ONE,
            }],
        }
    }

    fn markup() -> RetailScheme {
        RetailScheme {
            variant: RetailVariant::Markup {
                markup: Fraction::decimal(25, 2),
            },
            mt_prices: BTreeMap::new(),
        }
    }

    fn grid() -> Vec<Money> {
        (1..=30).map(|k| Money(k * 100_000)).collect()
    }

    fn best_response(op: &str, rival: &str, view: &BTreeMap<OperatorId, Money>, outlook: &Outlook<'_>, cost: i64) -> Money {
        let policy = IotPolicy::BestResponse {
            grid_micro: grid(),
            cost_micro: Money(cost),
        };
        let me = OperatorId::from(op);
        let rivals = [OperatorId::from(rival)];
        let state = OwnState {
            operator: &me,
            current: view[&me],
            rivals: &rivals,
            steering_open: true,
            outlook: Some(outlook),
        };
        decide_iot(
            &policy,
            &InfoCentreView {
                observer: me.clone(),
                period: 1,
                levels: view.clone(),
            },
            &state,
        )
        .unwrap()
    }

    #[test]
    fn small_operators_price_at_or_above_large_ones() {
        // same coverage, B1 lists X first, C1 lists Y first; X gets the larger cohort
        let networks = vec![
            VisitedNetwork {
                operator: "X".into(),
                band: Band::Gsm900,
                coverage: Fraction::decimal(9, 1),
            },
            VisitedNetwork {
                operator: "Y".into(),
                band: Band::Gsm900,
                coverage: Fraction::decimal(9, 1),
            },
        ];
        let b1 = SimProfile {
            preferred: BTreeMap::from([("A".into(), vec!["X".into(), "Y".into()])]),
            ..profile("B1", &[])
        };
        let c1 = SimProfile {
            preferred: BTreeMap::from([("A".into(), vec!["Y".into(), "X".into()])]),
            ..profile("C1", &[])
        };
        let (big, small) = (
            DemandParams {
                base_minutes: 90_000,
                ..demand(2)
            },
            DemandParams {
                base_minutes: 10_000,
                ..demand(2)
            },
        );
        let scheme = markup();
        let outlook = Outlook {
            country: "A".into(),
            networks,
            cohorts: vec![
                OutlookCohort {
                    profile: &b1,
                    retail: &scheme,
                    demand: &big,
                    steering: false,
                },
                OutlookCohort {
                    profile: &c1,
                    retail: &scheme,
                    demand: &small,
                    steering: false,
                },
            ],
        };
        let view = levels(&[("X", 1_000_000), ("Y", 1_000_000)]);
        let x = best_response("X", "Y", &view, &outlook, 200_000);
        let y = best_response("Y", "X", &view, &outlook, 200_000);
        assert!(y >= x, "small {y} large {x}");
    }

    #[test]
    fn best_response_drifts_down_under_steering() {
        let networks = vec![
            VisitedNetwork {
                operator: "X".into(),
                band: Band::Gsm900,
                coverage: Fraction::ONE,
            },
            VisitedNetwork {
                operator: "Y".into(),
                band: Band::Gsm900,
                coverage: Fraction::ONE,
            },
        ];
        let b1 = SimProfile {
            preferred: BTreeMap::from([("A".into(), vec!["X".into(), "Y".into()])]),
            ..profile("B1", &[])
        };
        let d = demand(1);
        let scheme = markup();
        let outlook = Outlook {
            country: "A".into(),
            networks,
            cohorts: vec![OutlookCohort {
                profile: &b1,
                retail: &scheme,
                demand: &d,
                steering: true,
            }],
        };
        let cost = 300_000;
        let mut view = levels(&[("X", 3_000_000), ("Y", 3_000_000)]);
        let mut mins = vec![3_000_000];
        for round in 0..60 {
            let (op, rival) = if round % 2 == 0 { ("Y", "X") } else { ("X", "Y") };
            let level = best_response(op, rival, &view, &outlook, cost);
            view.insert(op.into(), level);
            mins.push(view.values().min().unwrap().0);
        }
        assert!(mins.windows(2).all(|w| w[1] <= w[0]), "{mins:?}");
        assert!(*mins.last().unwrap() <= cost + 100_000, "{mins:?}");
    }

    proptest! {
        #[test]
        fn undercut_never_below_floor(delta in 0i64..999, floor in 0i64..2_000_000, rival in 0i64..3_000_000) {
            let policy = IotPolicy::Undercut { delta: Fraction::decimal(delta, 3), floor_micro: Money(floor) };
            let view = InfoCentreView { observer: "A1".into(), period: 1, levels: levels(&[("A2", rival)]) };
            let me = OperatorId::from("A1");
            let rivals = [OperatorId::from("A2")];
            prop_assert!(decide_iot(&policy, &view, &own(&me, &rivals, true)).unwrap() >= Money(floor));
        }

        #[test]
        fn steering_off_never_accepts(pct in 0i64..99, min in 0i64..2_000) {
            let m = Market::new(nets(9, 7), levels(&[("A1", 1_000_000), ("A2", 900_000)]));
            let d = m.evaluate("B1", &offer(Counterparty::Operator("B1".into()), vec![volume(min, pct)]), false);
            prop_assert!(!d.accept);
        }
    }
}
