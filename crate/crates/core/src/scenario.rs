//! Scenario files: the JSON document, its validation and the indexed form used by the simulator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::demand::{DemandParams, DestinationWeight, Mode};
use crate::ids::{is_valid_id, AggregatorId, CountryId, OperatorId, ZoneId};
use crate::money::{Fraction, Money};
use crate::selection::{Band, SimProfile};
use crate::settlement::{FixedRates, TransitTariff};
use crate::strategy::{validate_tiers, Affiliations, Counterparty, IotPolicy, Tier};
use crate::tariff::{Destination, IotSchedule, PeriodClass, RateKey, RetailGroup, RetailScheme, RetailVariant, TermType, ZoneMap};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    /// Location in the document, e.g. `retail[1].scheme.markup`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{}", summarize(.0))]
    Invalid(Vec<ValidationError>),
}

fn summarize(errors: &[ValidationError]) -> String {
    match errors {
        [] => "invalid scenario".into(),
        [one] => format!("invalid scenario: {one}"),
        [first, rest @ ..] => format!("invalid scenario: {first} (and {} more)", rest.len()),
    }
}

/// A per-period fraction: a constant, an explicit series, or a linear ramp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Trajectory {
    Constant(Fraction),
    Series(Vec<Fraction>),
    Ramp(Ramp),
}

/// `from` until period `start`, `to` from period `end`, linear in between.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ramp {
    pub from: Fraction,
    pub to: Fraction,
    pub start: u32,
    pub end: u32,
}

impl Trajectory {
    pub fn at(&self, period: u32) -> Fraction {
        match self {
            Trajectory::Constant(c) => *c,
            Trajectory::Series(s) => s.get(period as usize).or(s.last()).copied().unwrap_or(Fraction::ZERO),
            Trajectory::Ramp(r) => {
                if period <= r.start {
                    r.from
                } else if period >= r.end {
                    r.to
                } else {
                    Fraction::lerp(r.from, r.to, i64::from(period - r.start), i64::from(r.end - r.start))
                }
            }
        }
    }

    fn check(&self, horizon: u32, path: &str, v: &mut Validator) {
        let values: Vec<Fraction> = match self {
            Trajectory::Constant(c) => vec![*c],
            Trajectory::Series(s) => {
                if (s.len() as u64) < u64::from(horizon) {
                    v.push(path, format!("series has {} values, horizon is {horizon}", s.len()));
                }
                s.clone()
            }
            Trajectory::Ramp(r) => {
                if r.start > r.end {
                    v.push(path, "ramp start is after its end");
                }
                vec![r.from, r.to]
            }
        };
        if values.iter().any(|f| !f.is_unit_interval()) {
            v.push(path, "values must lie in [0, 1]");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub horizon: u32,
    pub seed: u64,
    pub mode: Mode,
    #[serde(default)]
    pub currency_note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountrySpec {
    pub id: CountryId,
    #[serde(default)]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub id: OperatorId,
    pub country: CountryId,
    pub band: Band,
    pub coverage: Trajectory,
    /// Cost of carrying one minute of roamed traffic.
    #[serde(default)]
    pub cost_micro_per_min: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    pub zone: ZoneId,
    pub period: PeriodClass,
    pub term: TermType,
    /// Per billing unit.
    pub rate_micro: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffSpec {
    pub owner: OperatorId,
    pub billing_unit_s: u32,
    #[serde(default)]
    pub setup_fee_micro: Money,
    #[serde(default)]
    pub mt_rate_micro: Money,
    #[serde(default)]
    pub valid_from: u32,
    pub headline_zone: ZoneId,
    pub rates: Vec<RateSpec>,
}

impl TariffSpec {
    pub fn schedule(&self) -> IotSchedule {
        IotSchedule {
            owner: self.owner.clone(),
            rates: self
                .rates
                .iter()
                .map(|r| {
                    (
                        RateKey {
                            zone: r.zone.clone(),
                            period: r.period,
                            term: r.term,
                        },
                        r.rate_micro,
                    )
                })
                .collect(),
            billing_unit_s: self.billing_unit_s,
            setup_fee: self.setup_fee_micro,
            mt_rate: self.mt_rate_micro,
            valid_from: self.valid_from,
            headline_zone: self.headline_zone.clone(),
        }
    }

    /// Every charge scaled by `level / headline`, rounded half-up.
    pub fn scale_headline(&mut self, level: Money) {
        let scaled = self.schedule().scaled_to(level);
        for r in &mut self.rates {
            r.rate_micro = scaled.rates[&RateKey {
                zone: r.zone.clone(),
                period: r.period,
                term: r.term,
            }];
        }
        self.setup_fee_micro = scaled.setup_fee;
        self.mt_rate_micro = scaled.mt_rate;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneEntry {
    pub country: CountryId,
    pub term: TermType,
    pub zone: ZoneId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneMapSpec {
    pub owner: OperatorId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domestic_zone: Option<ZoneId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_zone: Option<ZoneId>,
    pub entries: Vec<ZoneEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitSpec {
    pub country: CountryId,
    pub transit_micro_per_min: Money,
    pub fixed_termination_micro_per_min: Money,
    pub mobile_termination_micro_per_min: Money,
    pub international_call_micro_per_min: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSpec {
    Markup(Fraction),
    SingleRate { groups: Vec<RetailGroup> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtPrice {
    pub country: CountryId,
    pub price_micro_per_min: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetailSpec {
    pub home_op: OperatorId,
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub mt_prices: Vec<MtPrice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimProfileSpec {
    pub home_op: OperatorId,
    pub preferred: BTreeMap<CountryId, Vec<OperatorId>>,
    pub dual_band: Trajectory,
    #[serde(default)]
    pub manual_propensity: Fraction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub home_op: OperatorId,
    pub country: CountryId,
    pub base_minutes: u64,
    pub reference_price_micro: Money,
    pub elasticity: Fraction,
    #[serde(default)]
    pub mt_ratio: Fraction,
    #[serde(default)]
    pub substitution_share: Fraction,
    pub call_duration_mean_s: u32,
    pub peak_fraction: Fraction,
    pub destination_mix: Vec<DestinationWeight>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfferSpec {
    /// An operator, group or broker id.
    pub counterparty: String,
    pub tiers: Vec<Tier>,
    #[serde(default)]
    pub from_period: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub operator: OperatorId,
    pub iot: IotPolicy,
    #[serde(default)]
    pub offers: Vec<OfferSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub id: AggregatorId,
    pub members: Vec<OperatorId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrokerSpec {
    pub id: AggregatorId,
    pub clients: Vec<OperatorId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringSpec {
    /// First period in which each home operator can reprogram SIMs over the air.
    #[serde(default)]
    pub capability_from: BTreeMap<OperatorId, u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NondiscriminationSpec {
    #[serde(default)]
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub country: CountryId,
    pub non_roamed_micro_per_min: Money,
}

/// The scenario document as written on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub meta: Meta,
    pub countries: Vec<CountrySpec>,
    pub operators: Vec<OperatorSpec>,
    pub tariffs: Vec<TariffSpec>,
    pub zone_maps: Vec<ZoneMapSpec>,
    pub transit: Vec<TransitSpec>,
    pub retail: Vec<RetailSpec>,
    pub sim_profiles: Vec<SimProfileSpec>,
    pub demand: Vec<DemandSpec>,
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub groups: Vec<GroupSpec>,
    #[serde(default)]
    pub brokers: Vec<BrokerSpec>,
    #[serde(default)]
    pub steering: SteeringSpec,
    #[serde(default)]
    pub nondiscrimination: NondiscriminationSpec,
    #[serde(default)]
    pub benchmarks: Vec<BenchmarkSpec>,
}

/// A discount offer a visited operator makes from a given period on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Offer {
    pub visited_op: OperatorId,
    pub counterparty: Counterparty,
    pub tiers: Vec<Tier>,
    pub from_period: u32,
}

/// A validated scenario with lookup tables.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub operators: BTreeMap<OperatorId, OperatorSpec>,
    /// Licensed operators per country, in id order.
    pub roster: BTreeMap<CountryId, Vec<OperatorId>>,
    /// Tariff versions per operator, ordered by `valid_from`.
    pub schedules: BTreeMap<OperatorId, Vec<IotSchedule>>,
    pub zone_maps: BTreeMap<OperatorId, ZoneMap>,
    pub transit: TransitTariff,
    pub retail: BTreeMap<OperatorId, RetailScheme>,
    pub profiles: BTreeMap<OperatorId, SimProfile>,
    pub dual_band: BTreeMap<OperatorId, Trajectory>,
    pub demand: BTreeMap<(OperatorId, CountryId), DemandParams>,
    pub policies: BTreeMap<OperatorId, IotPolicy>,
    pub offers: Vec<Offer>,
    pub affiliations: Affiliations,
    pub benchmarks: BTreeMap<CountryId, Money>,
}

impl PartialEq for Scenario {
    fn eq(&self, other: &Self) -> bool {
        self.file == other.file
    }
}

impl Scenario {
    pub fn horizon(&self) -> u32 {
        self.file.meta.horizon
    }

    pub fn seed(&self) -> u64 {
        self.file.meta.seed
    }

    pub fn mode(&self) -> Mode {
        self.file.meta.mode
    }

    pub fn country_of(&self, op: &OperatorId) -> &CountryId {
        &self.operators[op].country
    }

    /// Whether `home` can reprogram SIMs in `period`.
    pub fn steering_at(&self, home: &OperatorId, period: u32) -> bool {
        self.file.steering.capability_from.get(home).is_some_and(|from| *from <= period)
    }

    /// Home operators with demand in `country`, in id order.
    pub fn visitors(&self, country: &CountryId) -> Vec<OperatorId> {
        self.demand.keys().filter(|(_, c)| c == country).map(|(h, _)| h.clone()).collect()
    }

    /// Re-validates a modified copy of the document.
    pub fn modified(&self, edit: impl FnOnce(&mut ScenarioFile)) -> Result<Scenario, ScenarioError> {
        let mut file = self.file.clone();
        edit(&mut file);
        Scenario::from_file(file)
    }

    /// The normalized document as pretty JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Scenario::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
        let mut v = Validator::default();
        let scenario = build(file, &mut v);
        if v.errors.is_empty() {
            Ok(scenario)
        } else {
            Err(ScenarioError::Invalid(v.errors))
        }
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_json(&text)
}

#[derive(Default)]
struct Validator {
    errors: Vec<ValidationError>,
}

impl Validator {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ValidationError {
            path: path.into(),
            message: message.into(),
        });
    }

    fn unit(&mut self, path: impl Into<String>, f: Fraction) {
        if !f.is_unit_interval() {
            self.push(path, format!("{f} is not in [0, 1]"));
        }
    }

    fn non_negative(&mut self, path: impl Into<String>, m: Money) {
        if m.is_negative() {
            self.push(path, format!("{m} is negative"));
        }
    }

    fn id(&mut self, path: impl Into<String>, id: &str) {
        if !is_valid_id(id) {
            self.push(path, format!("{id:?} is not a valid identifier"));
        }
    }
}

fn build(file: ScenarioFile, v: &mut Validator) -> Scenario {
    let horizon = file.meta.horizon;
    let countries: BTreeSet<CountryId> = file.countries.iter().map(|c| c.id.clone()).collect();
    let mut seen = BTreeSet::new();
    for (i, c) in file.countries.iter().enumerate() {
        v.id(format!("countries[{i}].id"), c.id.as_str());
        if !seen.insert(&c.id) {
            v.push(format!("countries[{i}].id"), format!("duplicate country {}", c.id));
        }
    }

    let mut operators = BTreeMap::new();
    let mut roster: BTreeMap<CountryId, Vec<OperatorId>> = countries.iter().map(|c| (c.clone(), Vec::new())).collect();
    for (i, o) in file.operators.iter().enumerate() {
        let p = format!("operators[{i}]");
        v.id(format!("{p}.id"), o.id.as_str());
        if operators.insert(o.id.clone(), o.clone()).is_some() {
            v.push(format!("{p}.id"), format!("duplicate operator {}", o.id));
        }
        match roster.get_mut(&o.country) {
            Some(r) => r.push(o.id.clone()),
            None => v.push(format!("{p}.country"), format!("unknown country {}", o.country)),
        }
        o.coverage.check(horizon, &format!("{p}.coverage"), v);
        v.non_negative(format!("{p}.cost_micro_per_min"), o.cost_micro_per_min);
    }
    for (c, ops) in &mut roster {
        ops.sort();
        if ops.is_empty() {
            v.push("countries", format!("country {c} has no operators"));
        }
    }
    let known_op = |op: &OperatorId| operators.contains_key(op);

    let mut schedules: BTreeMap<OperatorId, Vec<IotSchedule>> = BTreeMap::new();
    for (i, t) in file.tariffs.iter().enumerate() {
        let p = format!("tariffs[{i}]");
        if !known_op(&t.owner) {
            v.push(format!("{p}.owner"), format!("unknown operator {}", t.owner));
        }
        if t.billing_unit_s == 0 {
            v.push(format!("{p}.billing_unit_s"), "must be positive");
        }
        v.non_negative(format!("{p}.setup_fee_micro"), t.setup_fee_micro);
        v.non_negative(format!("{p}.mt_rate_micro"), t.mt_rate_micro);
        let mut keys = BTreeSet::new();
        for (j, r) in t.rates.iter().enumerate() {
            v.non_negative(format!("{p}.rates[{j}].rate_micro"), r.rate_micro);
            if !keys.insert((r.zone.clone(), r.period, r.term)) {
                v.push(format!("{p}.rates[{j}]"), "duplicate rate");
            }
        }
        let zones: BTreeSet<&ZoneId> = t.rates.iter().map(|r| &r.zone).collect();
        for z in &zones {
            for period in PeriodClass::ALL {
                for term in TermType::ALL {
                    if !keys.contains(&((*z).clone(), period, term)) {
                        v.push(format!("{p}.rates"), format!("zone {z} has no {period} {term} rate"));
                    }
                }
            }
        }
        if !zones.contains(&t.headline_zone) {
            v.push(format!("{p}.headline_zone"), format!("zone {} has no rates", t.headline_zone));
        }
        let versions = schedules.entry(t.owner.clone()).or_default();
        if versions.iter().any(|s| s.valid_from == t.valid_from) {
            v.push(
                format!("{p}.valid_from"),
                format!("{} already has a tariff from period {}", t.owner, t.valid_from),
            );
        }
        versions.push(t.schedule());
    }
    for versions in schedules.values_mut() {
        versions.sort_by_key(|s| s.valid_from);
    }
    for op in operators.keys() {
        if schedules.get(op).and_then(|s| s.first()).is_none_or(|s| s.valid_from != 0) {
            v.push("tariffs", format!("{op} has no tariff valid from period 0"));
        }
    }

    let mut zone_maps = BTreeMap::new();
    for (i, z) in file.zone_maps.iter().enumerate() {
        let p = format!("zone_maps[{i}]");
        let Some(op) = operators.get(&z.owner) else {
            v.push(format!("{p}.owner"), format!("unknown operator {}", z.owner));
            continue;
        };
        let mut entries = BTreeMap::new();
        for (j, e) in z.entries.iter().enumerate() {
            if !countries.contains(&e.country) {
                v.push(format!("{p}.entries[{j}].country"), format!("unknown country {}", e.country));
            }
            if entries.insert((e.country.clone(), e.term), e.zone.clone()).is_some() {
                v.push(format!("{p}.entries[{j}]"), "duplicate destination");
            }
        }
        let used: Vec<&ZoneId> = z.domestic_zone.iter().chain(&z.home_zone).chain(entries.values()).collect();
        for s in schedules.get(&z.owner).into_iter().flatten() {
            for zone in &used {
                if !s.rates.keys().any(|k| &k.zone == *zone) {
                    v.push(p.to_string(), format!("zone {zone} has no rates in the tariff valid from {}", s.valid_from));
                }
            }
        }
        let map = ZoneMap {
            owner: z.owner.clone(),
            country: op.country.clone(),
            domestic_zone: z.domestic_zone.clone(),
            home_zone: z.home_zone.clone(),
            entries,
        };
        if zone_maps.insert(z.owner.clone(), map).is_some() {
            v.push(format!("{p}.owner"), format!("duplicate zone map for {}", z.owner));
        }
    }
    for op in operators.keys() {
        if !zone_maps.contains_key(op) {
            v.push("zone_maps", format!("{op} has no zone map"));
        }
    }

    let mut transit = TransitTariff::default();
    for (i, t) in file.transit.iter().enumerate() {
        let p = format!("transit[{i}]");
        if !countries.contains(&t.country) {
            v.push(format!("{p}.country"), format!("unknown country {}", t.country));
        }
        for (field, m) in [
            ("transit_micro_per_min", t.transit_micro_per_min),
            ("fixed_termination_micro_per_min", t.fixed_termination_micro_per_min),
            ("mobile_termination_micro_per_min", t.mobile_termination_micro_per_min),
            ("international_call_micro_per_min", t.international_call_micro_per_min),
        ] {
            v.non_negative(format!("{p}.{field}"), m);
        }
        let rates = FixedRates {
            transit_micro_per_min: t.transit_micro_per_min,
            fixed_termination_micro_per_min: t.fixed_termination_micro_per_min,
            mobile_termination_micro_per_min: t.mobile_termination_micro_per_min,
            international_call_micro_per_min: t.international_call_micro_per_min,
        };
        if transit.countries.insert(t.country.clone(), rates).is_some() {
            v.push(format!("{p}.country"), format!("duplicate transit tariff for {}", t.country));
        }
    }
    for c in &countries {
        if !transit.countries.contains_key(c) {
            v.push("transit", format!("country {c} has no transit tariff"));
        }
    }

    let mut retail = BTreeMap::new();
    let mut retail_index = BTreeMap::new();
    for (i, r) in file.retail.iter().enumerate() {
        let p = format!("retail[{i}]");
        if !known_op(&r.home_op) {
            v.push(format!("{p}.home_op"), format!("unknown operator {}", r.home_op));
        }
        let variant = match &r.scheme {
            SchemeSpec::Markup(m) => {
                v.unit(format!("{p}.scheme.markup"), *m);
                RetailVariant::Markup { markup: *m }
            }
            SchemeSpec::SingleRate { groups } => {
                let mut covered = BTreeSet::new();
                for (j, g) in groups.iter().enumerate() {
                    v.non_negative(format!("{p}.scheme.single_rate.groups[{j}].rate_micro_per_min"), g.rate_micro_per_min);
                    for c in &g.countries {
                        if !countries.contains(c) {
                            v.push(format!("{p}.scheme.single_rate.groups[{j}].countries"), format!("unknown country {c}"));
                        }
                        if !covered.insert(c.clone()) {
                            v.push(format!("{p}.scheme.single_rate.groups[{j}].countries"), format!("{c} is in two groups"));
                        }
                    }
                }
                RetailVariant::SingleRate { groups: groups.clone() }
            }
        };
        let mut mt_prices = BTreeMap::new();
        for (j, m) in r.mt_prices.iter().enumerate() {
            v.non_negative(format!("{p}.mt_prices[{j}].price_micro_per_min"), m.price_micro_per_min);
            if mt_prices.insert(m.country.clone(), m.price_micro_per_min).is_some() {
                v.push(format!("{p}.mt_prices[{j}].country"), "duplicate country");
            }
        }
        retail_index.insert(r.home_op.clone(), i);
        if retail.insert(r.home_op.clone(), RetailScheme { variant, mt_prices }).is_some() {
            v.push(format!("{p}.home_op"), format!("duplicate retail scheme for {}", r.home_op));
        }
    }

    let mut profiles = BTreeMap::new();
    let mut dual_band = BTreeMap::new();
    for (i, s) in file.sim_profiles.iter().enumerate() {
        let p = format!("sim_profiles[{i}]");
        if !known_op(&s.home_op) {
            v.push(format!("{p}.home_op"), format!("unknown operator {}", s.home_op));
        }
        for (country, list) in &s.preferred {
            let lp = format!("{p}.preferred.{country}");
            let Some(licensed) = roster.get(country) else {
                v.push(lp, format!("unknown country {country}"));
                continue;
            };
            for (j, op) in list.iter().enumerate() {
                if !known_op(op) {
                    v.push(format!("{lp}[{j}]"), format!("unknown operator {op}"));
                } else if !licensed.contains(op) {
                    v.push(format!("{lp}[{j}]"), format!("{op} is not licensed in {country}"));
                } else if list[..j].contains(op) {
                    v.push(format!("{lp}[{j}]"), format!("{op} listed twice"));
                }
            }
        }
        s.dual_band.check(horizon, &format!("{p}.dual_band"), v);
        v.unit(format!("{p}.manual_propensity"), s.manual_propensity);
        let profile = SimProfile {
            home_operator: s.home_op.clone(),
            preferred: s.preferred.clone(),
            handset_band_mix: s.dual_band.at(0),
            manual_propensity: s.manual_propensity,
        };
        dual_band.insert(s.home_op.clone(), s.dual_band.clone());
        if profiles.insert(s.home_op.clone(), profile).is_some() {
            v.push(format!("{p}.home_op"), format!("duplicate profile for {}", s.home_op));
        }
    }

    let mut demand = BTreeMap::new();
    for (i, d) in file.demand.iter().enumerate() {
        let p = format!("demand[{i}]");
        let home = operators.get(&d.home_op);
        if home.is_none() {
            v.push(format!("{p}.home_op"), format!("unknown operator {}", d.home_op));
        }
        if !countries.contains(&d.country) {
            v.push(format!("{p}.country"), format!("unknown country {}", d.country));
        }
        if home.is_some_and(|h| h.country == d.country) {
            v.push(format!("{p}.country"), "subscribers do not roam in their home country");
        }
        if d.reference_price_micro.0 <= 0 {
            v.push(format!("{p}.reference_price_micro"), "must be positive");
        }
        if d.elasticity < Fraction::ZERO {
            v.push(format!("{p}.elasticity"), "must not be negative");
        }
        v.unit(format!("{p}.mt_ratio"), d.mt_ratio);
        v.unit(format!("{p}.substitution_share"), d.substitution_share);
        v.unit(format!("{p}.peak_fraction"), d.peak_fraction);
        if d.call_duration_mean_s == 0 {
            v.push(format!("{p}.call_duration_mean_s"), "must be positive");
        }
        let mut total = 0i64;
        for (j, w) in d.destination_mix.iter().enumerate() {
            let wp = format!("{p}.destination_mix[{j}]");
            v.unit(format!("{wp}.weight"), w.weight);
            total += w.weight.ppb();
            if !countries.contains(&w.country) {
                v.push(format!("{wp}.country"), format!("unknown country {}", w.country));
                continue;
            }
            let dest = Destination {
                country: w.country.clone(),
                term: w.term,
            };
            if let Some(h) = home {
                for op in roster.get(&d.country).into_iter().flatten() {
                    if let Some(map) = zone_maps.get(op) {
                        if let Err(e) = map.resolve(&dest, &h.country) {
                            v.push(wp.clone(), e.to_string());
                        }
                    }
                }
            }
        }
        if total != Fraction::ONE.ppb() {
            v.push(format!("{p}.destination_mix"), "weights must sum to 1");
        }
        match retail.get(&d.home_op) {
            None => v.push(format!("{p}.home_op"), format!("{} has no retail scheme", d.home_op)),
            Some(scheme) => {
                let rp = format!("retail[{}]", retail_index[&d.home_op]);
                if matches!(scheme.variant, RetailVariant::SingleRate { .. }) && scheme.group_rate(&d.country).is_err() {
                    v.push(format!("{rp}.scheme.single_rate"), format!("no group covers {}", d.country));
                }
                if !scheme.mt_prices.contains_key(&d.country) {
                    v.push(format!("{rp}.mt_prices"), format!("no MT price for {}", d.country));
                }
            }
        }
        if !profiles.contains_key(&d.home_op) {
            v.push(format!("{p}.home_op"), format!("{} has no SIM profile", d.home_op));
        }
        let params = DemandParams {
            base_minutes: d.base_minutes,
            reference_price: d.reference_price_micro,
            elasticity: d.elasticity,
            mt_ratio: d.mt_ratio,
            substitution_share: d.substitution_share,
            call_duration_mean_s: d.call_duration_mean_s,
            peak_fraction: d.peak_fraction,
            destination_mix: d.destination_mix.clone(),
        };
        if demand.insert((d.home_op.clone(), d.country.clone()), params).is_some() {
            v.push(p.to_string(), format!("duplicate demand for {} in {}", d.home_op, d.country));
        }
    }

    let mut affiliations = Affiliations::default();
    let mut aggregator_ids = BTreeSet::new();
    let mut grouped = BTreeSet::new();
    for (i, g) in file.groups.iter().enumerate() {
        let p = format!("groups[{i}]");
        v.id(format!("{p}.id"), g.id.as_str());
        if !aggregator_ids.insert(g.id.clone()) || known_op(&OperatorId::new(g.id.as_str())) {
            v.push(format!("{p}.id"), format!("id {} is already used", g.id));
        }
        for (j, m) in g.members.iter().enumerate() {
            if !known_op(m) {
                v.push(format!("{p}.members[{j}]"), format!("unknown operator {m}"));
            }
            if !grouped.insert(m.clone()) {
                v.push(format!("{p}.members[{j}]"), format!("{m} belongs to more than one group"));
            }
        }
        affiliations.add_group(g.id.clone(), g.members.clone());
    }
    for (i, b) in file.brokers.iter().enumerate() {
        let p = format!("brokers[{i}]");
        v.id(format!("{p}.id"), b.id.as_str());
        if !aggregator_ids.insert(b.id.clone()) || known_op(&OperatorId::new(b.id.as_str())) {
            v.push(format!("{p}.id"), format!("id {} is already used", b.id));
        }
        for (j, c) in b.clients.iter().enumerate() {
            if !known_op(c) {
                v.push(format!("{p}.clients[{j}]"), format!("unknown operator {c}"));
            }
        }
        affiliations.add_broker(b.id.clone(), b.clients.clone());
    }

    let mut policies = BTreeMap::new();
    let mut offers = Vec::new();
    for (i, pol) in file.policies.iter().enumerate() {
        let p = format!("policies[{i}]");
        let Some(op) = operators.get(&pol.operator) else {
            v.push(format!("{p}.operator"), format!("unknown operator {}", pol.operator));
            continue;
        };
        if let Err(e) = pol.iot.validate(op.cost_micro_per_min) {
            v.push(format!("{p}.iot"), e);
        }
        if policies.insert(pol.operator.clone(), pol.iot.clone()).is_some() {
            v.push(format!("{p}.operator"), format!("duplicate policy for {}", pol.operator));
        }
        for (j, o) in pol.offers.iter().enumerate() {
            let op_id = OperatorId::new(o.counterparty.clone());
            let agg = AggregatorId::new(o.counterparty.clone());
            let counterparty = if let Some(target) = operators.get(&op_id) {
                if target.country == op.country {
                    v.push(format!("{p}.offers[{j}].counterparty"), "offers go to foreign operators");
                }
                Counterparty::Operator(op_id)
            } else if file.groups.iter().any(|g| g.id == agg) {
                Counterparty::Group(agg)
            } else if file.brokers.iter().any(|b| b.id == agg) {
                Counterparty::Broker(agg)
            } else {
                v.push(format!("{p}.offers[{j}].counterparty"), format!("unknown counterparty {}", o.counterparty));
                continue;
            };
            if let Err(e) = validate_tiers(&o.tiers) {
                v.push(format!("{p}.offers[{j}].tiers"), e.to_string());
            }
            offers.push(Offer {
                visited_op: pol.operator.clone(),
                counterparty,
                tiers: o.tiers.clone(),
                from_period: o.from_period,
            });
        }
    }
    for op in file.steering.capability_from.keys() {
        if !known_op(op) {
            v.push(format!("steering.capability_from.{op}"), format!("unknown operator {op}"));
        }
    }

    let mut benchmarks = BTreeMap::new();
    for (i, b) in file.benchmarks.iter().enumerate() {
        let p = format!("benchmarks[{i}]");
        if !countries.contains(&b.country) {
            v.push(format!("{p}.country"), format!("unknown country {}", b.country));
        }
        if b.non_roamed_micro_per_min.0 <= 0 {
            v.push(format!("{p}.non_roamed_micro_per_min"), "must be positive");
        }
        if benchmarks.insert(b.country.clone(), b.non_roamed_micro_per_min).is_some() {
            v.push(format!("{p}.country"), "duplicate benchmark");
        }
    }

    Scenario {
        file,
        operators,
        roster,
        schedules,
        zone_maps,
        transit,
        retail,
        profiles,
        dual_band,
        demand,
        policies,
        offers,
        affiliations,
        benchmarks,
    }
}
