//! `extham`: runs extended-phase-space scenarios and writes CSV trajectories
//! and JSON check reports.
//!
//! Exit status: 0 when every verdict passes, 1 when one fails, 2 for a bad
//! configuration, 3 for a numerical failure.

mod commands;
mod config;
mod report;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use config::ScenarioArgs;
use report::CheckReport;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] extham_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "extham",
    version,
    about = "Hamiltonian dynamics in extended phase space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a trajectory, write it as CSV and report invariant drift.
    Simulate(ScenarioArgs),
    /// Scan [He, I] over seeded on-shell states.
    Bracket(ScenarioArgs),
    /// Apply the symmetry generated by an invariant to one state.
    Symmetry(ScenarioArgs),
    /// Run the built-in acceptance suite.
    Check {
        /// Criteria to run (default: all).
        #[arg(long = "criterion", value_delimiter = ',')]
        criteria: Vec<usize>,
        #[arg(long)]
        out_report: Option<std::path::PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<CheckReport, CliError> {
    let (report, out) = match cli.command {
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            let out = cfg.out_report.clone();
            (commands::run_simulate(cfg)?, out)
        }
        Command::Bracket(args) => {
            let cfg = args.resolve()?;
            let out = cfg.out_report.clone();
            (commands::run_bracket(cfg)?, out)
        }
        Command::Symmetry(args) => {
            let cfg = args.resolve()?;
            let out = cfg.out_report.clone();
            (commands::run_symmetry(cfg)?, out)
        }
        Command::Check { criteria, out_report } => (commands::run_check(&criteria)?, out_report),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match out {
        Some(path) => std::fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))?,
        None => println!("{json}"),
    }
    Ok(report)
}

fn print_summary(report: &CheckReport) {
    let mut err = std::io::stderr().lock();
    for c in &report.criteria {
        let _ = writeln!(err, "{}", c.summary());
        for check in &c.checks {
            let _ = writeln!(err, "      {check}");
        }
        if let Some(e) = &c.error {
            let _ = writeln!(err, "      error: {e}");
        }
    }
    for v in &report.verdicts {
        let _ = writeln!(err, "{v}");
    }
    let _ = writeln!(err, "{}", if report.passed { "PASS" } else { "FAIL" });
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(report) => {
            print_summary(&report);
            ExitCode::from(if report.passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
