// Runs the baseline scenario, writes its CSV artifacts and prints the summary report.
use std::path::PathBuf;

use roamsim::export::{render_report, summarize, write_run};
use roamsim::scenario::load_scenario;
use roamsim::sim::run;

pub fn run_example() -> anyhow::Result<Vec<PathBuf>> {
    let scenario = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/two_country_baseline.json"))?;
    let output = run(&scenario, scenario.seed())?;
    let dir = tempfile::tempdir()?;
    let out = std::env::var_os("ROAMSIM_OUT").map_or_else(|| dir.path().to_path_buf(), PathBuf::from);
    let files = write_run(&out, &scenario, &output)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    print!("{}", render_report(&summarize(&out)?));
    Ok(files)
}

fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
