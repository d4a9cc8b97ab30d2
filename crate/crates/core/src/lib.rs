//! Deterministic agent-based simulator of a wholesale international roaming market.
//!
//! Visited operators publish inter-operator tariffs (IOTs), home operators
//! resell roamed calls at retail, subscribers attach to visited networks
//! through SIM preferred lists, coverage and handset bands, and operators
//! adjust IOT levels and negotiate volume discounts period by period.
//!
//! - [`tariff`]: wholesale and retail rating of roamed calls.
//! - [`settlement`]: per-call ledger chains, conservation checks and invoices.
//! - [`selection`]: network attachment shares and over-the-air list updates.
//! - [`demand`]: roaming volumes and call records per subscriber cohort.
//! - [`strategy`]: IOT policies, discount offers and non-discrimination.
//! - [`sim`]: the period loop, market metrics and the externality experiment.
//! - [`scenario`] and [`export`]: JSON scenarios in, CSV artifacts out.
//!
//! ```
//! let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/two_country_baseline.json");
//! let scenario = roamsim::scenario::load_scenario(path).unwrap();
//! let output = roamsim::sim::run(&scenario, scenario.seed()).unwrap();
//! assert!(output.periods.iter().all(|p| p.conservation.balanced));
//! ```

pub mod demand;
pub mod export;
pub mod ids;
pub mod money;
pub mod scenario;
pub mod selection;
pub mod settlement;
pub mod sim;
pub mod strategy;
pub mod tariff;
