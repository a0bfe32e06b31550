//! `loglab`: run empirical scenarios, emit their tables, and inspect the
//! frozen constants registry.
//!
//! Exit codes: 0 when every assertion passed (or nothing gated), 1 when at
//! least one assertion failed, 2 on configuration or execution errors.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use loglab_cli::{
    emit_tables, run_scenario, ConstantsRegistry, ConstantsStore, ScenarioConfig, ALL_SCENARIOS,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "loglab", version, about = "empirical scenario driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios, assert against the frozen constants, emit tables.
    Run {
        /// Scenario id (e1..e6) or "all". Ignored when --config is given.
        #[arg(long)]
        scenario: Option<String>,
        /// TOML scenario configuration; overrides --scenario.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Root seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override for emitted tables.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fit constants instead of asserting: skip registry-backed
        /// assertions, accumulate measured extremes, and write them to
        /// fitted_constants.toml in the output directory.
        #[arg(long)]
        fit_constants: bool,
    },
    /// Run scenarios and emit tables without gating the exit code on
    /// assertion outcomes (exploration mode).
    Emit {
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the frozen constants registry.
    Registry,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(all_pass) => {
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { scenario, config, seed, out, fit_constants } => {
            execute(scenario, config, seed, out, fit_constants, true)
        }
        Command::Emit { scenario, config, seed, out } => {
            execute(scenario, config, seed, out, false, false)?;
            Ok(true)
        }
        Command::Registry => {
            print!("{}", ConstantsRegistry::frozen().render_table());
            Ok(true)
        }
    }
}

/// Resolves the configured scenario list.
fn resolve_configs(
    scenario: Option<String>,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<Vec<ScenarioConfig>> {
    let mut configs = match (config, scenario) {
        (Some(path), _) => vec![ScenarioConfig::load(&path)?],
        (None, Some(id)) if id == "all" => ALL_SCENARIOS
            .iter()
            .map(|s| ScenarioConfig::default_for(s))
            .collect::<Result<Vec<_>>>()?,
        (None, Some(id)) => vec![ScenarioConfig::default_for(&id)?],
        (None, None) => bail!("pass --scenario <id|all> or --config <path>"),
    };
    if let Some(s) = seed {
        for cfg in &mut configs {
            cfg.seed = s;
        }
    }
    if let Some(dir) = &out {
        // A multi-scenario run gets per-scenario subdirectories so the
        // summaries cannot clobber each other.
        let nested = configs.len() > 1;
        for cfg in &mut configs {
            cfg.out_dir = Some(if nested { dir.join(&cfg.scenario) } else { dir.clone() });
        }
    }
    Ok(configs)
}

fn execute(
    scenario: Option<String>,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    fit_constants: bool,
    gate: bool,
) -> Result<bool> {
    let configs = resolve_configs(scenario, config, seed, out)?;
    let mut all_pass = true;
    let mut store = if fit_constants {
        ConstantsStore::fit_mode()
    } else {
        ConstantsStore::assert_mode(ConstantsRegistry::frozen())
    };
    let mut last_out = None;
    for cfg in &configs {
        let report = run_scenario(cfg, &mut store)
            .with_context(|| format!("running scenario {}", cfg.scenario))?;
        print!("{}", report.render_lines());
        let out_dir = cfg.out_dir();
        emit_tables(&report, &out_dir)
            .with_context(|| format!("emitting tables for {}", cfg.scenario))?;
        println!("tables written to {}", out_dir.display());
        all_pass &= report.all_pass();
        last_out = Some(out_dir);
    }
    if fit_constants {
        let fitted = store.fitted_registry();
        let dir = last_out.unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir)?;
        let path = dir.join("fitted_constants.toml");
        fitted.save(&path)?;
        print!("{}", fitted.render_table());
        println!("fitted extremes written to {} (apply headroom before freezing)", path.display());
    }
    Ok(!gate || all_pass)
}
