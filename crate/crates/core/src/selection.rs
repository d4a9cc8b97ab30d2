//! Network selection by roaming handsets.
//!
//! A handset entering a visited country scans its SIM's preferred list in
//! order and attaches to the first network whose signal it finds; if none
//! is found it falls back to any compatible network, weighted by effective
//! coverage. Subscribers who select manually go to the cheapest network.
//! Over-the-air reprogramming rewrites the preferred list.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ids::{CountryId, OperatorId};
use crate::money::{Fraction, Money};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectionError {
    #[error("no visited networks in {0}")]
    EmptyNetworkList(CountryId),
    #[error("steering is unavailable for {0}")]
    SteeringUnavailable(OperatorId),
    #[error("preferred list for {country} is invalid: {reason}")]
    InvalidList { country: CountryId, reason: String },
    #[error("no retail price for network {0}")]
    MissingPrice(OperatorId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    #[serde(rename = "GSM900")]
    Gsm900,
    #[serde(rename = "GSM1800")]
    Gsm1800,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handset {
    SingleBand900,
    DualBand,
}

impl Handset {
    pub fn supports(self, band: Band) -> bool {
        match self {
            Handset::DualBand => true,
            Handset::SingleBand900 => band == Band::Gsm900,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitedNetwork {
    pub operator: OperatorId,
    pub band: Band,
    pub coverage: Fraction,
}

/// A home operator's subscriber cohort as seen by network selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimProfile {
    pub home_operator: OperatorId,
    pub preferred: BTreeMap<CountryId, Vec<OperatorId>>,
    /// Fraction of handsets that are dual-band.
    pub handset_band_mix: Fraction,
    /// Fraction of subscribers who select networks manually.
    pub manual_propensity: Fraction,
}

impl SimProfile {
    pub fn list(&self, country: &CountryId) -> &[OperatorId] {
        self.preferred.get(country).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn head(&self, country: &CountryId) -> Option<&OperatorId> {
        self.list(country).first()
    }
}

/// Coverage a handset actually sees on a network: zero when the band is unsupported.
pub fn effective_coverage(network: &VisitedNetwork, handset: Handset) -> f64 {
    if handset.supports(network.band) {
        network.coverage.to_f64()
    } else {
        0.0
    }
}

/// Attachment probabilities per visited network, in the order of the network list.
///
/// The components sum to at most one; the deficit is subscribers with no service.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareVector {
    pub entries: Vec<(OperatorId, f64)>,
}

impl ShareVector {
    pub fn get(&self, op: &OperatorId) -> f64 {
        self.entries.iter().find(|(o, _)| o == op).map_or(0.0, |(_, s)| *s)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, s)| s).sum()
    }

    pub fn no_service(&self) -> f64 {
        (1.0 - self.total()).max(0.0)
    }
}

fn cheapest_compatible<'a>(
    networks: &'a [VisitedNetwork],
    handset: Handset,
    prices: &BTreeMap<OperatorId, Money>,
) -> Result<Option<&'a VisitedNetwork>, SelectionError> {
    let mut best: Option<(&VisitedNetwork, Money)> = None;
    for n in networks.iter().filter(|n| effective_coverage(n, handset) > 0.0) {
        let price = *prices.get(&n.operator).ok_or_else(|| SelectionError::MissingPrice(n.operator.clone()))?;
        let better = match best {
            None => true,
            Some((b, p)) => price < p || (price == p && n.operator < b.operator),
        };
        if better {
            best = Some((n, price));
        }
    }
    Ok(best.map(|(n, _)| n))
}

/// Automatic attachment for one handset class: sequential list scan, then coverage-weighted fallback.
fn automatic_shares(list: &[OperatorId], networks: &[VisitedNetwork], handset: Handset) -> Vec<f64> {
    let mut shares = vec![0.0; networks.len()];
    let mut miss = 1.0;
    for op in list {
        if let Some(i) = networks.iter().position(|n| &n.operator == op) {
            let c = effective_coverage(&networks[i], handset);
            shares[i] += miss * c;
            miss *= 1.0 - c;
        }
    }
    let total: f64 = networks.iter().map(|n| effective_coverage(n, handset)).sum();
    if total > 0.0 && miss > 0.0 {
        for (i, n) in networks.iter().enumerate() {
            shares[i] += miss * effective_coverage(n, handset) / total;
        }
    }
    shares
}

fn class_shares(
    list: &[OperatorId],
    networks: &[VisitedNetwork],
    handset: Handset,
    manual: f64,
    prices: &BTreeMap<OperatorId, Money>,
) -> Result<Vec<f64>, SelectionError> {
    let mut shares: Vec<f64> = automatic_shares(list, networks, handset).into_iter().map(|s| s * (1.0 - manual)).collect();
    if manual > 0.0 {
        if let Some(choice) = cheapest_compatible(networks, handset, prices)? {
            let i = networks.iter().position(|n| n.operator == choice.operator).expect("network in list");
            shares[i] += manual;
        }
    }
    Ok(shares)
}

/// Expected attachment shares of a subscriber cohort over the networks of `country`.
pub fn expected_shares(
    profile: &SimProfile,
    country: &CountryId,
    networks: &[VisitedNetwork],
    retail_prices: &BTreeMap<OperatorId, Money>,
) -> Result<ShareVector, SelectionError> {
    if networks.is_empty() {
        return Err(SelectionError::EmptyNetworkList(country.clone()));
    }
    let list = profile.list(country);
    let manual = profile.manual_propensity.to_f64();
    let dual = profile.handset_band_mix.to_f64();
    let dual_shares = class_shares(list, networks, Handset::DualBand, manual, retail_prices)?;
    let single_shares = class_shares(list, networks, Handset::SingleBand900, manual, retail_prices)?;
    let entries = networks
        .iter()
        .zip(dual_shares.iter().zip(&single_shares))
        .map(|(n, (d, s))| (n.operator.clone(), dual * d + (1.0 - dual) * s))
        .collect();
    Ok(ShareVector { entries })
}

/// Draws one attachment by simulating a handset; `None` is no service.
pub fn select_network_sampled<R: Rng + ?Sized>(
    profile: &SimProfile,
    country: &CountryId,
    networks: &[VisitedNetwork],
    retail_prices: &BTreeMap<OperatorId, Money>,
    rng: &mut R,
) -> Result<Option<OperatorId>, SelectionError> {
    if networks.is_empty() {
        return Err(SelectionError::EmptyNetworkList(country.clone()));
    }
    let handset = if rng.random::<f64>() < profile.handset_band_mix.to_f64() {
        Handset::DualBand
    } else {
        Handset::SingleBand900
    };
    if rng.random::<f64>() < profile.manual_propensity.to_f64() {
        return Ok(cheapest_compatible(networks, handset, retail_prices)?.map(|n| n.operator.clone()));
    }
    for op in profile.list(country) {
        if let Some(n) = networks.iter().find(|n| &n.operator == op) {
            if rng.random::<f64>() < effective_coverage(n, handset) {
                return Ok(Some(op.clone()));
            }
        }
    }
    let total: f64 = networks.iter().map(|n| effective_coverage(n, handset)).sum();
    if total <= 0.0 {
        return Ok(None);
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for n in networks {
        let c = effective_coverage(n, handset);
        if c <= 0.0 {
            continue;
        }
        if u < c {
            return Ok(Some(n.operator.clone()));
        }
        u -= c;
        last = Some(n);
    }
    Ok(last.map(|n| n.operator.clone()))
}

/// Replaces the preferred list for one country over the air.
pub fn ota_reprogram(
    profile: &SimProfile,
    country: &CountryId,
    new_list: &[OperatorId],
    steering_enabled: bool,
    licensed: &[OperatorId],
) -> Result<SimProfile, SelectionError> {
    if !steering_enabled {
        return Err(SelectionError::SteeringUnavailable(profile.home_operator.clone()));
    }
    validate_list(country, new_list, licensed)?;
    let mut updated = profile.clone();
    updated.preferred.insert(country.clone(), new_list.to_vec());
    Ok(updated)
}

pub fn validate_list(country: &CountryId, list: &[OperatorId], licensed: &[OperatorId]) -> Result<(), SelectionError> {
    for (i, op) in list.iter().enumerate() {
        if !licensed.contains(op) {
            return Err(SelectionError::InvalidList {
                country: country.clone(),
                reason: format!("{op} is not licensed there"),
            });
        }
        if list[..i].contains(op) {
            return Err(SelectionError::InvalidList {
                country: country.clone(),
                reason: format!("{op} listed twice"),
            });
        }
    }
    Ok(())
}

/// `list` with `op` moved to the front.
pub fn with_head(list: &[OperatorId], op: &OperatorId) -> Vec<OperatorId> {
    std::iter::once(op.clone()).chain(list.iter().filter(|o| *o != op).cloned()).collect()
}
