//! Command-line front end for `evoq-core`: instance configs, verification
//! harnesses, control synthesis and the acceptance suite.

pub mod commands;
pub mod config;
pub mod harness;
pub mod instance;
pub mod suite;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use evoq_core::Direction;

use crate::commands::{Outcome, VerifySuite};
use crate::config::{parse_config, VariantName};
use crate::instance::{CliError, Instance};

#[derive(Debug, Parser)]
#[command(name = "evoq", version, about = "Evolutionary equations in weighted L2 spaces")]
pub struct Cli {
    /// Print the full JSON report on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward solve of the configured right-hand side.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Backward-in-time (nu-adjoint) solve of the configured data.
    Adjoint {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification harness on an instance.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "duality")]
        suite: VerifySuite,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Null-control synthesis and observability estimate.
    Control {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the variant named in the config.
        #[arg(long, value_enum)]
        variant: Option<VariantName>,
        /// Also cross-check feasibility, range inclusion and observability.
        #[arg(long)]
        certify_duality: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named suite; `acceptance` is the only one.
    Suite {
        #[arg(value_parser = ["acceptance"])]
        name: String,
        /// Run a single criterion (1 to 10).
        #[arg(long)]
        criterion: Option<u8>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn load_instance(path: &Path) -> Result<Instance, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let loaded = parse_config(&text, base).map_err(CliError::Schema)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Instance::from_loaded(&name, &loaded)
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Solve { config, out } => {
            commands::solve(&load_instance(config)?, Direction::Forward, out.as_deref())
        }
        Command::Adjoint { config, out } => {
            commands::solve(&load_instance(config)?, Direction::Adjoint, out.as_deref())
        }
        Command::Verify { config, suite, out } => {
            commands::verify(&load_instance(config)?, *suite, out.as_deref())
        }
        Command::Control {
            config,
            variant,
            certify_duality,
            out,
        } => commands::control(&load_instance(config)?, *variant, *certify_duality, out.as_deref()),
        Command::Suite {
            criterion, out, ..
        } => commands::acceptance(*criterion, out.as_deref()),
    }
}

/// Runs a command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(outcome) => {
            if cli.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&outcome.report).expect("reports serialize")
                );
            } else if let Command::Suite { .. } = cli.command {
                let report: suite::SuiteReport =
                    serde_json::from_value(outcome.report.clone()).expect("suite report");
                for row in &report.rows {
                    println!("{}", row.line());
                }
            } else {
                println!("{}", outcome.report);
            }
            if outcome.pass {
                0
            } else {
                eprintln!("evoq: one or more assertions failed");
                1
            }
        }
        Err(e) => {
            eprintln!("evoq: {e}");
            e.exit_code()
        }
    }
}
