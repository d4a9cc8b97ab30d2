use num::rational::BigRational;

use super::{run, RunOutput, SimError};
use crate::ids::{CountryId, OperatorId};
use crate::money::{rational_to_f64, Fraction, Money};
use crate::scenario::Scenario;

/// One visited operator's outcome in one period, baseline against perturbed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalityRow {
    pub period: u32,
    pub operator: OperatorId,
    pub share_base: f64,
    pub share_perturbed: f64,
    /// Exact difference of the two shares.
    pub share_delta: f64,
    pub minutes_base: f64,
    pub minutes_perturbed: f64,
    pub revenue_base: Money,
    pub revenue_perturbed: Money,
    pub profit_base: Money,
    pub profit_perturbed: Money,
    pub headline_base: Money,
    pub headline_perturbed: Money,
}

/// Minutes demanded in the target's country in one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExternalityTotal {
    pub period: u32,
    pub minutes_base: u64,
    pub minutes_perturbed: u64,
}

#[derive(Debug, Clone)]
pub struct ExternalityReport {
    pub target: OperatorId,
    pub delta: Fraction,
    pub country: CountryId,
    pub rows: Vec<ExternalityRow>,
    pub totals: Vec<ExternalityTotal>,
    pub baseline: RunOutput,
    pub perturbed: RunOutput,
}

impl ExternalityReport {
    /// Largest absolute share delta over all periods and operators.
    pub fn max_abs_share_delta(&self) -> f64 {
        self.rows.iter().map(|r| r.share_delta.abs()).fold(0.0, f64::max)
    }
}

/// Runs the scenario twice, once with `target`'s IOT schedule scaled by `1 - delta` from period 0.
///
/// Without steering and manual selection, shares depend on coverage and
/// preferred lists only, so the cut moves volume but not shares.
pub fn externality_experiment(scenario: &Scenario, target: &OperatorId, delta: Fraction) -> Result<ExternalityReport, SimError> {
    let precondition = |msg: String| Err(SimError::ExperimentPreconditionViolated(msg));
    let Some(spec) = scenario.operators.get(target) else {
        return precondition(format!("unknown operator {target}"));
    };
    if !(Fraction::ZERO..Fraction::ONE).contains(&delta) {
        return precondition(format!("delta {delta} is not in [0, 1)"));
    }
    if let Some((op, from)) = scenario.file.steering.capability_from.iter().find(|(_, from)| **from < scenario.horizon()) {
        return precondition(format!("steering is available to {op} from period {from}"));
    }
    if let Some(p) = scenario.profiles.values().find(|p| p.manual_propensity > Fraction::ZERO) {
        return precondition(format!("{} has manual selection {}", p.home_operator, p.manual_propensity));
    }
    let perturbed_scenario = scenario.modified(|f| {
        for t in f.tariffs.iter_mut().filter(|t| &t.owner == target) {
            let level = delta.one_minus_of(t.schedule().headline_per_minute());
            t.scale_headline(level);
        }
    })?;
    let seed = scenario.seed();
    let baseline = run(scenario, seed)?;
    let perturbed = run(&perturbed_scenario, seed)?;
    let country = spec.country.clone();
    let mut rows = Vec::new();
    let mut totals = Vec::new();
    for (b, p) in baseline.periods.iter().zip(&perturbed.periods) {
        let in_country =
            |v: &std::collections::BTreeMap<(OperatorId, CountryId), u64>| -> u64 { v.iter().filter(|((_, c), _)| c == &country).map(|(_, m)| m).sum() };
        totals.push(ExternalityTotal {
            period: b.period,
            minutes_base: in_country(&b.volumes),
            minutes_perturbed: in_country(&p.volumes),
        });
        for (mb, mp) in b.metrics.iter().zip(&p.metrics).filter(|(m, _)| m.country == country) {
            debug_assert_eq!(mb.operator, mp.operator);
            let delta: BigRational = &mp.share_exact - &mb.share_exact;
            rows.push(ExternalityRow {
                period: b.period,
                operator: mb.operator.clone(),
                share_base: mb.wholesale_share,
                share_perturbed: mp.wholesale_share,
                share_delta: rational_to_f64(&delta),
                minutes_base: rational_to_f64(&mb.wholesale_minutes),
                minutes_perturbed: rational_to_f64(&mp.wholesale_minutes),
                revenue_base: mb.wholesale_rev,
                revenue_perturbed: mp.wholesale_rev,
                profit_base: mb.wholesale_profit,
                profit_perturbed: mp.wholesale_profit,
                headline_base: mb.headline_iot,
                headline_perturbed: mp.headline_iot,
            });
        }
    }
    Ok(ExternalityReport {
        target: target.clone(),
        delta,
        country,
        rows,
        totals,
        baseline,
        perturbed,
    })
}
