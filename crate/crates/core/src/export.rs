//! CSV artifacts of a run and the summary report read back from them.
//!
//! Every file is written to a temporary file in the target directory and
//! renamed into place, so an artifact is either complete or absent.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::money::format_rational;
use crate::scenario::Scenario;
use crate::sim::RunOutput;
use crate::tariff::Usage;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub const LEDGER_HEADER: [&str; 6] = ["period", "call_id", "payer", "payee", "role", "amount_micro"];
pub const INVOICES_HEADER: [&str; 7] = ["period", "issuer", "counterparty", "gross_micro", "discount_micro", "net_micro", "minutes"];
pub const CDRS_HEADER: [&str; 9] = [
    "period",
    "call_id",
    "direction",
    "home_op",
    "visited_op",
    "zone",
    "term_type",
    "period_class",
    "duration_s",
];
pub const NEGOTIATIONS_HEADER: [&str; 6] = ["period", "visited_op", "counterparty", "decision", "tier_rate", "requires_preferred"];
pub const OTA_HEADER: [&str; 4] = ["period", "home_op", "country", "new_list"];
pub const METRICS_HEADER: [&str; 10] = [
    "period",
    "country",
    "operator",
    "wholesale_share",
    "cr2",
    "avg_retail_micro_per_min",
    "ratio_vs_nonroamed",
    "wholesale_rev_micro",
    "wholesale_profit_micro",
    "min_headline_iot_micro",
];

/// File names written by [`write_run`].
pub const ARTIFACTS: [&str; 7] = [
    "scenario.json",
    "cdrs.csv",
    "ledger.csv",
    "invoices.csv",
    "negotiations.csv",
    "ota.csv",
    "metrics.csv",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `contents` to `path` atomically.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ExportError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| ExportError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn float(x: f64) -> String {
    format!("{x:.9}")
}

/// Renders every artifact of a run, keyed by file name.
pub fn render_run(scenario: &Scenario, output: &RunOutput) -> BTreeMap<&'static str, Vec<u8>> {
    let mut files = BTreeMap::new();
    files.insert("scenario.json", (scenario.to_json() + "\n").into_bytes());
    let cdrs = output.periods.iter().flat_map(|p| &p.cdrs).map(|c| {
        let duration = match &c.call.usage {
            Usage::Call { duration_s } => duration_s.to_string(),
            Usage::Aggregate { seconds, .. } => format_rational(seconds, 6),
        };
        vec![
            c.period.to_string(),
            c.call_id.to_string(),
            c.call.direction.to_string(),
            c.call.home_operator.to_string(),
            c.call.visited_operator.to_string(),
            c.zone.as_ref().map(ToString::to_string).unwrap_or_default(),
            c.call.destination.as_ref().map(|d| d.term.to_string()).unwrap_or_default(),
            c.call.period.to_string(),
            duration,
        ]
    });
    files.insert("cdrs.csv", csv_bytes(&CDRS_HEADER, cdrs));
    let ledger = output.periods.iter().flat_map(|p| &p.ledger).map(|e| {
        vec![
            e.period.to_string(),
            e.call_ref.to_string(),
            e.payer.to_string(),
            e.payee.to_string(),
            e.role.to_string(),
            e.amount.0.to_string(),
        ]
    });
    files.insert("ledger.csv", csv_bytes(&LEDGER_HEADER, ledger));
    let invoices = output.periods.iter().flat_map(|p| &p.invoices).map(|i| {
        vec![
            i.period.to_string(),
            i.issuer.to_string(),
            i.counterparty.to_string(),
            i.gross.0.to_string(),
            i.discount_applied.0.to_string(),
            i.net.0.to_string(),
            i.minutes.to_string(),
        ]
    });
    files.insert("invoices.csv", csv_bytes(&INVOICES_HEADER, invoices));
    let negotiations = output.negotiations().map(|n| {
        vec![
            n.period.to_string(),
            n.visited_op.to_string(),
            n.counterparty.to_string(),
            n.decision.to_string(),
            n.tier_rate.to_string(),
            n.requires_preferred.to_string(),
        ]
    });
    files.insert("negotiations.csv", csv_bytes(&NEGOTIATIONS_HEADER, negotiations));
    let ota = output.ota().map(|o| {
        let list: Vec<&str> = o.new_list.iter().map(|op| op.as_str()).collect();
        vec![o.period.to_string(), o.home_op.to_string(), o.country.to_string(), list.join(";")]
    });
    files.insert("ota.csv", csv_bytes(&OTA_HEADER, ota));
    let metrics = output.metrics().map(|m| {
        vec![
            m.period.to_string(),
            m.country.to_string(),
            m.operator.to_string(),
            float(m.wholesale_share),
            float(m.cr2),
            m.avg_retail_per_min.map(|a| a.0.to_string()).unwrap_or_default(),
            m.ratio_vs_nonroamed.map(float).unwrap_or_default(),
            m.wholesale_rev.0.to_string(),
            m.wholesale_profit.0.to_string(),
            m.min_headline_iot.0.to_string(),
        ]
    });
    files.insert("metrics.csv", csv_bytes(&METRICS_HEADER, metrics));
    files
}

/// Writes every artifact of a run into `dir`, creating it if needed.
pub fn write_run(dir: &Path, scenario: &Scenario, output: &RunOutput) -> Result<Vec<PathBuf>, ExportError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for (name, bytes) in render_run(scenario, output) {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// One line of the summary report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub period: u32,
    pub country: String,
    pub min_headline_iot: i64,
    pub cr2: f64,
    /// Mean ratio over operators with MO traffic.
    pub mean_ratio: Option<f64>,
    /// Offers accepted in the period (all countries).
    pub accepted: usize,
}

fn read_csv(path: &Path) -> Result<Vec<csv::StringRecord>, ExportError> {
    let mut r = csv::Reader::from_path(path).map_err(|source| ExportError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    r.records().collect::<Result<_, _>>().map_err(|source| ExportError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T, ExportError> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| ExportError::Format {
        path: path.to_path_buf(),
        message: format!("bad field {i} in {rec:?}"),
    })
}

/// Summarizes an artifact directory per period and country.
pub fn summarize(dir: &Path) -> Result<Vec<ReportLine>, ExportError> {
    let metrics_path = dir.join("metrics.csv");
    let negotiations_path = dir.join("negotiations.csv");
    let mut accepted: BTreeMap<u32, usize> = BTreeMap::new();
    for rec in read_csv(&negotiations_path)? {
        if rec.get(3) == Some("accept") {
            *accepted.entry(field(&negotiations_path, &rec, 0)?).or_default() += 1;
        }
    }
    let mut cells: BTreeMap<(u32, String), (i64, f64, Vec<f64>)> = BTreeMap::new();
    for rec in read_csv(&metrics_path)? {
        let period: u32 = field(&metrics_path, &rec, 0)?;
        let country = rec.get(1).unwrap_or_default().to_string();
        let cr2: f64 = field(&metrics_path, &rec, 4)?;
        let min_iot: i64 = field(&metrics_path, &rec, 9)?;
        let cell = cells.entry((period, country)).or_insert((min_iot, cr2, Vec::new()));
        if rec.get(6).is_some_and(|s| !s.is_empty()) {
            cell.2.push(field(&metrics_path, &rec, 6)?);
        }
    }
    Ok(cells
        .into_iter()
        .map(|((period, country), (min_headline_iot, cr2, ratios))| ReportLine {
            period,
            country,
            min_headline_iot,
            cr2,
            mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
            accepted: accepted.get(&period).copied().unwrap_or(0),
        })
        .collect())
}

/// The report as a fixed-width text table.
pub fn render_report(lines: &[ReportLine]) -> String {
    let mut out = format!(
        "{:>6}  {:<8} {:>14} {:>8} {:>8} {:>8}\n",
        "period", "country", "min_iot_micro", "cr2", "ratio", "accepted"
    );
    for l in lines {
        let ratio = l.mean_ratio.map_or_else(|| "-".to_string(), |r| format!("{r:.3}"));
        out.push_str(&format!(
            "{:>6}  {:<8} {:>14} {:>8.4} {:>8} {:>8}\n",
            l.period, l.country, l.min_headline_iot, l.cr2, ratio, l.accepted
        ));
    }
    out
}
