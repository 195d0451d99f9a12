//! Batch driver for the interface transport solvers: parse a scenario
//! configuration, run the selected solvers, and leave fields, meshes,
//! diagnostic series, and a check manifest in the output directory.
//!
//! Exit codes: 0 on success, 1 on configuration or solver errors, 2 when
//! `--check` is passed and a recorded check fails.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "levext", about = "Level set transport by velocity extension", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file or the built-in catalog.
    Run {
        /// Path to a config file, or the name of a built-in scenario.
        scenario: String,
        /// Replace one config value, as section.key=value. Repeatable.
        #[arg(long = "override", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory, overriding the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 2 if any recorded check fails.
        #[arg(long)]
        check: bool,
    },
    /// List the built-in scenarios.
    ListScenarios,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for (name, summary, _) in config::CATALOG {
                println!("{name:<12} {summary}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { scenario, overrides, out, check } => match run(scenario, overrides, out) {
            Err(err) => {
                eprintln!("error: {err:#}");
                ExitCode::from(1)
            }
            Ok(outcome) => {
                let ok = outcome.manifest.all_pass();
                if check && !ok {
                    ExitCode::from(2)
                } else {
                    ExitCode::SUCCESS
                }
            }
        },
    }
}

fn run(scenario: String, overrides: Vec<String>, out: Option<PathBuf>) -> Result<run::RunOutcome> {
    let text = match config::builtin(&scenario) {
        Some(text) => text.to_string(),
        None => std::fs::read_to_string(&scenario)
            .with_context(|| format!("reading config '{scenario}'"))?,
    };
    let mut raw = config::parse_raw(&text)?;
    for spec in &overrides {
        config::apply_override(&mut raw, spec)?;
    }
    if let Some(dir) = out {
        config::apply_override(&mut raw, &format!("run.out={}", dir.display()))?;
    }
    let cfg = config::parse_config(&raw)?;

    println!("scenario: {scenario}");
    println!("solvers: {}", cfg.solvers.iter().map(|s| s.name()).collect::<Vec<_>>().join(" "));
    let outcome = run::run_scenario(&cfg)?;

    println!(
        "\n{:<18} {:>13} {:>13} {:>13} {:>13} {:>8}",
        "solver", "grad_dev", "hausdorff", "sandwich_lo", "sandwich_up", "steps"
    );
    for row in &outcome.rows {
        println!(
            "{:<18} {:>13.3e} {:>13.3e} {:>13.3e} {:>13.3e} {:>8}",
            row.solver, row.grad_dev, row.hausdorff, row.sandwich[0], row.sandwich[1], row.steps
        );
    }
    println!();
    for check in &outcome.manifest.checks {
        let verdict = if check.pass { "pass" } else { "FAIL" };
        println!("check {}: {verdict} ({})", check.name, check.detail);
    }
    println!("\nartifacts in {}", outcome.out_dir.display());
    Ok(outcome)
}
