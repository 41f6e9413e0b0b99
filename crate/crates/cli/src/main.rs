//! `voldist`: runs volume-distance, asymptotics and validation scenarios
//! from JSON configs.
//!
//! Exit status: 0 when every check passes, 1 on a computation failure or a
//! failed check, 2 on an invalid config or body.

mod checks;
mod config;
mod output;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use crate::checks::tolerance_table;
use crate::config::{ScenarioConfig, Task};
use crate::output::ErrorReport;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("ConfigInvalid: {0}")]
    Config(String),
    #[error("ConfigInvalid ({}): {0}", .0.name())]
    Body(voldist_core::Error),
    #[error("ComputationFailed ({}): {0}", .0.name())]
    Compute(voldist_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Body(_) => 2,
            CliError::Compute(_) | CliError::Io { .. } => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "voldist", version, about = "Volume distance to convex hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task named in the config and write `<prefix>.csv` and
    /// `<prefix>.report.json`.
    Run {
        config: PathBuf,
        /// Output prefix; overrides `output` in the config.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        circle_nodes: Option<usize>,
        #[arg(long)]
        depth_nodes: Option<usize>,
    },
    /// Run the property suite on the configured body and print a JSON summary.
    Validate { config: PathBuf },
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(path: &Path, output: Option<PathBuf>, circle: Option<usize>, depth: Option<usize>) -> Result<bool, CliError> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(k) = circle {
        cfg.quadrature.circle_nodes = k;
    }
    if let Some(m) = depth {
        cfg.quadrature.depth_nodes = m;
    }
    let body = cfg.check()?;
    let prefix = output.unwrap_or_else(|| cfg.prefix(path));
    let (csv_path, report_path) = output::paths(&prefix);
    let outcome = tasks::run(&cfg, &body);
    match &outcome {
        Ok(o) => {
            let report = output::report(&cfg, path, Ok(o));
            write(&csv_path, &output::csv(&o.header, &o.rows))?;
            write(&report_path, &(serde_json::to_string_pretty(&report).expect("json") + "\n"))?;
            let passed = o.checks.iter().filter(|c| c.pass).count();
            for c in o.checks.iter().filter(|c| !c.pass) {
                eprintln!("FAIL {}: measured {:?}, tolerance {:e}", c.name, c.measured, c.tolerance);
            }
            println!(
                "{}: {passed}/{} checks pass; wrote {} and {}",
                path.display(),
                o.checks.len(),
                csv_path.display(),
                report_path.display()
            );
            Ok(passed == o.checks.len())
        }
        Err(e) => {
            let err = ErrorReport {
                name: e.name(),
                message: e.to_string(),
            };
            let report = output::report(&cfg, path, Err(err));
            write(&report_path, &(serde_json::to_string_pretty(&report).expect("json") + "\n"))?;
            Err(CliError::Compute(e.clone()))
        }
    }
}

fn validate(path: &Path) -> Result<bool, CliError> {
    let mut cfg = ScenarioConfig::load(path)?;
    cfg.task = Task::Validate;
    let body = cfg.check()?;
    let outcome = tasks::run(&cfg, &body).map_err(CliError::Compute)?;
    let pass = outcome.checks.iter().all(|c| c.pass);
    let summary = json!({
        "config_path": path.display().to_string(),
        "pass": pass,
        "checks": outcome.checks,
        "tolerances": tolerance_table(&cfg.tolerances, &outcome.checks),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            output,
            circle_nodes,
            depth_nodes,
        } => run(&config, output, circle_nodes, depth_nodes),
        Command::Validate { config } => validate(&config),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
