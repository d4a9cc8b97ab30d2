use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use roamsim::export::{render_report, summarize, write_run};
use roamsim::money::Fraction;
use roamsim::scenario::load_scenario;
use roamsim::sim::{externality_experiment, run};

#[derive(Parser)]
#[command(name = "roamsim", version, about = "International roaming market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV artifacts.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "ROAMSIM_OUT", default_value = "roamsim-out")]
        out: PathBuf,
    },
    /// Paired experiments.
    Experiment {
        #[command(subcommand)]
        kind: Experiment,
    },
    /// Validate a scenario without running it.
    Validate { scenario: PathBuf },
    /// Print a per-period summary of an artifact directory.
    Report { dir: PathBuf },
}

#[derive(Subcommand)]
enum Experiment {
    /// Cut one operator's IOT and compare shares, volumes and profits.
    Externality {
        scenario: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        delta: Fraction,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn one_line(e: &anyhow::Error) -> String {
    let mut line = String::new();
    for cause in e.chain().map(ToString::to_string) {
        if !line.contains(&cause) {
            if !line.is_empty() {
                line.push_str(": ");
            }
            line.push_str(&cause);
        }
    }
    line
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, seed, out } => {
            let s = load_scenario(&scenario)?;
            let output = run(&s, seed.unwrap_or(s.seed()))?;
            let files = write_run(&out, &s, &output)?;
            println!("{} periods, {} files written to {}", output.periods.len(), files.len(), out.display());
        }
        Command::Experiment {
            kind: Experiment::Externality { scenario, target, delta },
        } => {
            let s = load_scenario(&scenario)?;
            let report = externality_experiment(&s, &target.as_str().into(), delta)?;
            println!("target {} in {}, IOT cut {}", report.target, report.country, report.delta);
            println!(
                "{:>6} {:<8} {:>14} {:>12} {:>12} {:>16} {:>16}",
                "period", "operator", "share_delta", "minutes", "minutes'", "revenue", "revenue'"
            );
            for r in &report.rows {
                println!(
                    "{:>6} {:<8} {:>14.3e} {:>12.1} {:>12.1} {:>16} {:>16}",
                    r.period, r.operator, r.share_delta, r.minutes_base, r.minutes_perturbed, r.revenue_base, r.revenue_perturbed
                );
            }
            for t in &report.totals {
                println!(
                    "period {:>3}: country minutes {} -> {} ({:+})",
                    t.period,
                    t.minutes_base,
                    t.minutes_perturbed,
                    t.minutes_perturbed as i64 - t.minutes_base as i64
                );
            }
            println!("max |share delta| = {}", report.max_abs_share_delta());
        }
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario)?;
            println!(
                "{}: ok ({} countries, {} operators, horizon {})",
                scenario.display(),
                s.roster.len(),
                s.operators.len(),
                s.horizon()
            );
        }
        Command::Report { dir } => {
            let lines = summarize(&dir).with_context(|| format!("reading {}", dir.display()))?;
            print!("{}", render_report(&lines));
        }
    }
    Ok(())
}
