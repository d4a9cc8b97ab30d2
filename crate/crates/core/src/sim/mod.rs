//! The period-by-period market simulation.
//!
//! Each period runs in a fixed order: exogenous updates, operator
//! strategy from last period's view, retail prices, perceived prices,
//! demand and selection, call generation with rating and settlement, and
//! finally metrics.

mod experiment;
mod metrics;

use std::collections::{BTreeMap, BTreeSet};

use num::rational::BigRational;
use num::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::demand::{generate_calls, perceived_price, roaming_volume, CohortTraffic, DemandError, PriceHistory};
use crate::ids::{CountryId, OperatorId};
use crate::money::{Fraction, Money};
use crate::scenario::{Scenario, ScenarioError};
use crate::selection::{expected_shares, ota_reprogram, SelectionError, SimProfile, VisitedNetwork};
use crate::settlement::{
    build_invoices, settle_mo_call, settle_mt_call, verify_conservation, ConservationReport, DiscountContext, Invoice, LedgerEntry, SettlementError,
    TrafficBook,
};
use crate::strategy::{
    decide_iot, enforce_nondiscrimination, evaluate_offer, log_decision, observe_iots, propose_discount, Counterparty, DiscountAgreement, InfoCentreView,
    IotHistory, IotPolicy, NegotiationEvent, OfferMarket, Outlook, OutlookCohort, OwnState, PredictedCohort, StrategyError,
};
use crate::tariff::{rate_retail_mo, rate_retail_mt, rate_wholesale_mo, rate_wholesale_mt, Cdr, Direction, IotSchedule, TariffError};

pub use experiment::{externality_experiment, ExternalityReport, ExternalityRow, ExternalityTotal};
pub use metrics::{compute_metrics, MetricsRow, PeriodTraffic};

/// A failure inside one period.
#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error(transparent)]
    Tariff(#[from] TariffError),
    #[error(transparent)]
    Settlement(#[from] SettlementError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("no tariff in force for {0}")]
    NoTariff(OperatorId),
    #[error("no retail scheme for {0}")]
    NoRetail(OperatorId),
    #[error("ledger does not balance ({} broken chains, {} malformed entries)", .0.breaks.len(), .0.malformed.len())]
    Unbalanced(Box<ConservationReport>),
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("period {period}: {source}")]
    AtPeriod { period: u32, source: StepError },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("experiment precondition violated: {0}")]
    ExperimentPreconditionViolated(String),
}

/// A preferred-list change made over the air.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OtaEvent {
    pub period: u32,
    pub home_op: OperatorId,
    pub country: CountryId,
    pub new_list: Vec<OperatorId>,
}

/// Everything one period produced.
#[derive(Debug, Clone)]
pub struct PeriodOutput {
    pub period: u32,
    pub cdrs: Vec<Cdr>,
    pub ledger: Vec<LedgerEntry>,
    pub invoices: Vec<Invoice>,
    pub negotiations: Vec<NegotiationEvent>,
    pub ota: Vec<OtaEvent>,
    pub metrics: Vec<MetricsRow>,
    /// Minutes demanded per (home operator, visited country).
    pub volumes: BTreeMap<(OperatorId, CountryId), u64>,
    /// Perceived price per (home operator, visited country).
    pub perceived: BTreeMap<(OperatorId, CountryId), Money>,
    /// Headline IOT per minute in force during the period.
    pub headlines: BTreeMap<OperatorId, Money>,
    /// Preferred lists in force during the period.
    pub profiles: BTreeMap<OperatorId, SimProfile>,
    /// Agreements in force during the period.
    pub agreements: Vec<DiscountAgreement>,
    pub conservation: ConservationReport,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub periods: Vec<PeriodOutput>,
    /// Agreement table after the last period, including extensions that start later.
    pub final_agreements: Vec<DiscountAgreement>,
}

impl RunOutput {
    pub fn metrics(&self) -> impl Iterator<Item = &MetricsRow> {
        self.periods.iter().flat_map(|p| &p.metrics)
    }

    pub fn negotiations(&self) -> impl Iterator<Item = &NegotiationEvent> {
        self.periods.iter().flat_map(|p| &p.negotiations)
    }

    pub fn ota(&self) -> impl Iterator<Item = &OtaEvent> {
        self.periods.iter().flat_map(|p| &p.ota)
    }

    /// Lowest headline IOT in `country` during `period`.
    pub fn min_headline(&self, scenario: &Scenario, country: &CountryId, period: u32) -> Option<Money> {
        let p = self.periods.get(period as usize)?;
        scenario.roster.get(country)?.iter().filter_map(|op| p.headlines.get(op)).min().copied()
    }
}

/// Simulation state carried between periods.
#[derive(Debug, Clone)]
pub struct SimState {
    /// The next period to simulate.
    pub period: u32,
    /// Tariff version currently in force per operator, before headline scaling.
    pub base: BTreeMap<OperatorId, IotSchedule>,
    pub headlines: BTreeMap<OperatorId, Money>,
    pub coverage: BTreeMap<OperatorId, Fraction>,
    pub profiles: BTreeMap<OperatorId, SimProfile>,
    pub agreements: Vec<DiscountAgreement>,
    /// Offers made and not yet accepted.
    pub pending: Vec<DiscountAgreement>,
    pub history: IotHistory,
    last_prices: Option<PriceHistory>,
    last_traffic: Option<TrafficBook>,
    next_call_id: u64,
    rng: ChaCha8Rng,
}

impl SimState {
    pub fn new(scenario: &Scenario, seed: u64) -> Self {
        let base: BTreeMap<OperatorId, IotSchedule> = scenario
            .schedules
            .iter()
            .filter_map(|(op, v)| v.first().map(|s| (op.clone(), s.clone())))
            .collect();
        let headlines: BTreeMap<OperatorId, Money> = base.iter().map(|(op, s)| (op.clone(), s.headline_per_minute())).collect();
        SimState {
            period: 0,
            history: IotHistory::new(headlines.clone()),
            base,
            headlines,
            coverage: scenario.operators.iter().map(|(op, o)| (op.clone(), o.coverage.at(0))).collect(),
            profiles: scenario.profiles.clone(),
            agreements: Vec::new(),
            pending: Vec::new(),
            last_prices: None,
            last_traffic: None,
            next_call_id: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The schedules in force: each base tariff scaled to its headline.
    pub fn schedules(&self) -> BTreeMap<OperatorId, IotSchedule> {
        self.base.iter().map(|(op, s)| (op.clone(), s.scaled_to(self.headlines[op]))).collect()
    }

    pub fn networks(&self, scenario: &Scenario, country: &CountryId) -> Vec<VisitedNetwork> {
        scenario
            .roster
            .get(country)
            .into_iter()
            .flatten()
            .map(|op| VisitedNetwork {
                operator: op.clone(),
                band: scenario.operators[op].band,
                coverage: self.coverage[op],
            })
            .collect()
    }
}

/// Rates and settles call records against a set of schedules.
pub struct Rater<'a> {
    pub scenario: &'a Scenario,
    pub schedules: &'a BTreeMap<OperatorId, IotSchedule>,
}

/// Charges of one settled call record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settled {
    pub entries: Vec<LedgerEntry>,
    pub wholesale: Money,
    pub retail: Money,
}

impl Rater<'_> {
    pub fn settle(&self, cdr: &Cdr) -> Result<Settled, StepError> {
        let call = &cdr.call;
        let schedule = self
            .schedules
            .get(&call.visited_operator)
            .ok_or_else(|| StepError::NoTariff(call.visited_operator.clone()))?;
        let scheme = self
            .scenario
            .retail
            .get(&call.home_operator)
            .ok_or_else(|| StepError::NoRetail(call.home_operator.clone()))?;
        let transit = &self.scenario.transit;
        match call.direction {
            Direction::Mo => {
                let zones = self
                    .scenario
                    .zone_maps
                    .get(&call.visited_operator)
                    .ok_or(DemandError::MissingZoneMap(call.visited_operator.clone()))?;
                let wholesale = rate_wholesale_mo(schedule, zones, call)?;
                let retail = rate_retail_mo(scheme, wholesale, call)?;
                let entries = settle_mo_call(cdr.call_id, cdr.period, call, wholesale, retail, transit)?;
                Ok(Settled { entries, wholesale, retail })
            }
            Direction::Mt => {
                let wholesale = rate_wholesale_mt(schedule, call)?;
                let retail = rate_retail_mt(scheme, call)?;
                let entries = settle_mt_call(cdr.call_id, cdr.period, call, wholesale, retail, transit)?;
                Ok(Settled { entries, wholesale, retail })
            }
        }
    }
}

/// Runs the scenario over its whole horizon.
pub fn run(scenario: &Scenario, seed: u64) -> Result<RunOutput, SimError> {
    let mut state = SimState::new(scenario, seed);
    let mut periods = Vec::with_capacity(scenario.horizon() as usize);
    for _ in 0..scenario.horizon() {
        periods.push(step(&mut state, scenario)?);
    }
    Ok(RunOutput {
        periods,
        final_agreements: state.agreements,
    })
}

/// Advances the state by one period.
pub fn step(state: &mut SimState, scenario: &Scenario) -> Result<PeriodOutput, SimError> {
    let period = state.period;
    let out = step_inner(state, scenario).map_err(|source| SimError::AtPeriod { period, source })?;
    state.period += 1;
    Ok(out)
}

fn predicted_mo_minutes(scenario: &Scenario, state: &SimState, home: &OperatorId, country: &CountryId) -> f64 {
    let params = &scenario.demand[&(home.clone(), country.clone())];
    let perceived = perceived_price(state.last_prices.as_ref(), home, country, params.reference_price);
    roaming_volume(params, perceived) as f64 * params.mt_ratio.complement().to_f64()
}

fn step_inner(state: &mut SimState, scenario: &Scenario) -> Result<PeriodOutput, StepError> {
    let t = state.period;
    let countries: Vec<CountryId> = scenario.roster.keys().cloned().collect();

    // (1) exogenous updates
    for (op, spec) in &scenario.operators {
        state.coverage.insert(op.clone(), spec.coverage.at(t));
    }
    for (home, trajectory) in &scenario.dual_band {
        if let Some(p) = state.profiles.get_mut(home) {
            p.handset_band_mix = trajectory.at(t);
        }
    }
    if t > 0 {
        for (op, versions) in &scenario.schedules {
            if let Some(v) = versions.iter().find(|s| s.valid_from == t) {
                state.headlines.insert(op.clone(), v.headline_per_minute());
                state.base.insert(op.clone(), v.clone());
            }
        }
    }

    // (2) strategy from last period's view
    let mut negotiations = Vec::new();
    let mut ota = Vec::new();
    let new_levels = decide_levels(state, scenario, t)?;
    for offer in scenario.offers.iter().filter(|o| o.from_period == t) {
        let proposal = propose_discount(&offer.visited_op, offer.counterparty.clone(), offer.tiers.clone(), t, &mut negotiations)?;
        state.pending.push(proposal);
    }
    state
        .pending
        .sort_by(|a, b| (&a.visited_op, &a.counterparty).cmp(&(&b.visited_op, &b.counterparty)));
    let mut changed: BTreeSet<(OperatorId, CountryId)> = BTreeSet::new();
    let mut still_pending = Vec::new();
    for offer in std::mem::take(&mut state.pending) {
        let country = scenario.country_of(&offer.visited_op).clone();
        let lists = evaluate_pending(state, scenario, &offer, &country, &changed)?;
        let accepted = lists.is_some();
        log_decision(t, &offer, accepted, &mut negotiations);
        match lists {
            Some(lists) => {
                for (home, list) in lists {
                    let licensed = &scenario.roster[&country];
                    let updated = ota_reprogram(&state.profiles[&home], &country, &list, true, licensed)?;
                    state.profiles.insert(home.clone(), updated);
                    changed.insert((home.clone(), country.clone()));
                    ota.push(OtaEvent {
                        period: t,
                        home_op: home,
                        country: country.clone(),
                        new_list: list,
                    });
                }
                state.agreements.push(DiscountAgreement { active_from: t, ..offer });
            }
            None => still_pending.push(offer),
        }
    }
    state.pending = still_pending;
    if scenario.file.nondiscrimination.flag {
        let partners = partners(scenario);
        state.agreements = enforce_nondiscrimination(&state.agreements, true, &partners, t + 1, &mut negotiations);
    }
    state.headlines = new_levels;
    state.history.record(state.headlines.clone());
    let schedules = state.schedules();

    // (3)-(5) retail prices, perceived prices, volumes and shares; (6) calls
    let mut volumes = BTreeMap::new();
    let mut perceived_prices = BTreeMap::new();
    let mut cdrs = Vec::new();
    for ((home, country), params) in &scenario.demand {
        let networks = state.networks(scenario, country);
        let scheme = &scenario.retail[home];
        let mut prices = BTreeMap::new();
        for n in &networks {
            prices.insert(n.operator.clone(), scheme.price_per_minute(country, state.headlines[&n.operator])?);
        }
        let perceived = perceived_price(state.last_prices.as_ref(), home, country, params.reference_price);
        let minutes = roaming_volume(params, perceived);
        let profile = &state.profiles[home];
        let shares = expected_shares(profile, country, &networks, &prices)?;
        let traffic = CohortTraffic {
            period: t,
            home_operator: home,
            home_country: scenario.country_of(home),
            visited_country: country,
            minutes,
            params,
            shares: &shares,
            profile,
            networks: &networks,
            retail_prices: &prices,
            zone_maps: &scenario.zone_maps,
        };
        cdrs.extend(generate_calls(&traffic, scenario.mode(), &mut state.rng, &mut state.next_call_id)?);
        volumes.insert((home.clone(), country.clone()), minutes);
        perceived_prices.insert((home.clone(), country.clone()), perceived);
    }

    // rating and settlement
    let rater = Rater {
        scenario,
        schedules: &schedules,
    };
    let mut ledger = Vec::new();
    let mut usage = BTreeMap::new();
    let mut traffic = PeriodTraffic::default();
    let mut price_history: PriceHistory = BTreeMap::new();
    for cdr in &cdrs {
        let settled = rater.settle(cdr)?;
        let seconds = cdr.call.usage.seconds();
        traffic.add(cdr, &seconds, settled.retail);
        if cdr.call.direction == Direction::Mo {
            let slot = price_history
                .entry((cdr.call.home_operator.clone(), cdr.call.visited_country.clone()))
                .or_insert_with(|| (Money::ZERO, BigRational::zero()));
            slot.0 += settled.retail;
            slot.1 += &seconds;
        }
        usage.insert(cdr.call_id, seconds);
        ledger.extend(settled.entries);
    }
    let conservation = verify_conservation(&ledger);
    if !conservation.balanced {
        return Err(StepError::Unbalanced(Box::new(conservation)));
    }
    let in_force: Vec<DiscountAgreement> = state.agreements.iter().filter(|a| a.active_from <= t).cloned().collect();
    let profiles = &state.profiles;
    let is_preferred = |home: &OperatorId, visited: &OperatorId| profiles.get(home).and_then(|p| p.head(scenario.country_of(visited))) == Some(visited);
    let ctx = DiscountContext {
        agreements: &in_force,
        affiliations: &scenario.affiliations,
        previous: state.last_traffic.as_ref(),
        is_preferred: &is_preferred,
    };
    let invoices = build_invoices(&ledger, &usage, t, &ctx)?;

    // (7) metrics
    let metrics = compute_metrics(scenario, t, &countries, &state.headlines, &traffic, &invoices);

    state.last_traffic = Some(
        invoices
            .iter()
            .map(|i| ((i.issuer.clone(), i.counterparty.clone()), i.seconds.clone()))
            .collect(),
    );
    state.last_prices = Some(price_history);
    Ok(PeriodOutput {
        period: t,
        cdrs,
        ledger,
        invoices,
        negotiations,
        ota,
        metrics,
        volumes,
        perceived: perceived_prices,
        headlines: state.headlines.clone(),
        profiles: state.profiles.clone(),
        agreements: in_force,
        conservation,
    })
}

/// Every operator's next headline, decided from its lagged view.
fn decide_levels(state: &SimState, scenario: &Scenario, t: u32) -> Result<BTreeMap<OperatorId, Money>, StepError> {
    let mut levels = state.headlines.clone();
    for (op, spec) in &scenario.operators {
        let policy = scenario.policies.get(op).unwrap_or(&IotPolicy::Hold);
        if *policy == IotPolicy::Hold {
            continue;
        }
        let country = &spec.country;
        let visitors = scenario.visitors(country);
        let rivals: Vec<OperatorId> = scenario.roster[country].iter().filter(|o| *o != op).cloned().collect();
        let outlook = Outlook {
            country: country.clone(),
            networks: state.networks(scenario, country),
            cohorts: visitors
                .iter()
                .map(|h| OutlookCohort {
                    profile: &state.profiles[h],
                    retail: &scenario.retail[h],
                    demand: &scenario.demand[&(h.clone(), country.clone())],
                    steering: scenario.steering_at(h, t),
                })
                .collect(),
        };
        let view: InfoCentreView = observe_iots(&state.history, op, t);
        let own = OwnState {
            operator: op,
            current: state.headlines[op],
            rivals: &rivals,
            steering_open: visitors.iter().any(|h| scenario.steering_at(h, t)),
            outlook: Some(&outlook),
        };
        levels.insert(op.clone(), decide_iot(policy, &view, &own)?);
    }
    Ok(levels)
}

/// The new preferred lists if the offer is accepted, `None` if rejected.
///
/// The home operators that can steer and have not changed their list for
/// this country yet in this period decide jointly: the offer is accepted
/// iff it strictly lowers their combined predicted wholesale cost.
fn evaluate_pending(
    state: &SimState,
    scenario: &Scenario,
    offer: &DiscountAgreement,
    country: &CountryId,
    changed: &BTreeSet<(OperatorId, CountryId)>,
) -> Result<Option<BTreeMap<OperatorId, Vec<OperatorId>>>, StepError> {
    let t = state.period;
    let visitors = scenario.visitors(country);
    let deciders: Vec<OperatorId> = scenario
        .affiliations
        .members(&offer.counterparty)
        .into_iter()
        .filter(|h| visitors.contains(h) && scenario.steering_at(h, t) && !changed.contains(&(h.clone(), country.clone())))
        .collect();
    if deciders.is_empty() {
        return Ok(None);
    }
    let networks = state.networks(scenario, country);
    let levels = match t.checked_sub(1) {
        Some(prev) => state.history.levels_at(prev).clone(),
        None => state.headlines.clone(),
    };
    let cohorts: BTreeMap<OperatorId, PredictedCohort<'_>> = visitors
        .iter()
        .map(|h| {
            (
                h.clone(),
                PredictedCohort {
                    profile: &state.profiles[h],
                    minutes: predicted_mo_minutes(scenario, state, h, country),
                },
            )
        })
        .collect();
    let existing: Vec<DiscountAgreement> = state.agreements.iter().filter(|a| a.active_from <= t).cloned().collect();
    let market = OfferMarket {
        country,
        networks: &networks,
        levels: &levels,
        cohorts: &cohorts,
        existing: &existing,
        affiliations: &scenario.affiliations,
    };
    let (mut status_quo, mut offered) = (0.0, 0.0);
    let mut lists = BTreeMap::new();
    for h in &deciders {
        let d = evaluate_offer(h, offer, true, &market)?;
        status_quo += d.status_quo_cost;
        offered += d.offered_cost;
        if let Some(list) = d.new_list {
            lists.insert(h.clone(), list);
        }
    }
    if offered < status_quo {
        // evaluate_offer only proposes lists on its own acceptance
        for h in &deciders {
            if !lists.contains_key(h) {
                let list = crate::selection::with_head(state.profiles[h].list(country), &offer.visited_op);
                if list.as_slice() != state.profiles[h].list(country) {
                    lists.insert(h.clone(), list);
                }
            }
        }
        Ok(Some(lists))
    } else {
        Ok(None)
    }
}

/// Roaming partners of each visited operator: the foreign home operators
/// with demand in its country, and the groups and brokers they belong to.
fn partners(scenario: &Scenario) -> BTreeMap<OperatorId, Vec<Counterparty>> {
    let mut out = BTreeMap::new();
    for (op, spec) in &scenario.operators {
        let visitors = scenario.visitors(&spec.country);
        let mut set: BTreeSet<Counterparty> = visitors.iter().map(|h| Counterparty::Operator(h.clone())).collect();
        for h in &visitors {
            if let Some(g) = scenario.affiliations.group_of(h) {
                set.insert(Counterparty::Group(g.clone()));
            }
            for b in scenario.affiliations.brokers_of(h) {
                set.insert(Counterparty::Broker(b.clone()));
            }
        }
        out.insert(op.clone(), set.into_iter().collect());
    }
    out
}
