//! `hyptime` — run one configured experiment and write its report bundle.
//!
//! The subcommand names which analysis the config must carry (a config
//! without an analysis is accepted by every subcommand and writes a
//! manifest-only bundle). Flags override the config in place; the merged
//! config is what the manifest echoes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hyptime_cli::config::ExperimentConfig;
use hyptime_cli::runner::{apply_overrides, run_experiment, Overrides};

const EXIT_PASS: u8 = 0;
const EXIT_EXPECTATION_FAIL: u8 = 1;
const EXIT_CONFIG_ERROR: u8 = 2;
const EXIT_RUNTIME_ERROR: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hyptime",
    version,
    about = "Hyperbolic-time analytics and certified local manifolds",
    long_about = "Runs one JSON-configured experiment and writes a deterministic \
report bundle (manifest.json, per-analysis CSV/JSON artifacts, summary.txt). \
Identical config and seed produce byte-identical bundles."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON; schema shipped as schema/config.schema.json).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for the report bundle (overrides the config's
    /// `out_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Root seed override.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Forward-orbit horizon override (steps).
    #[arg(long, global = true, value_name = "N")]
    horizon: Option<u64>,

    /// Monte Carlo sample-count override (measure-sweep only).
    #[arg(long, global = true, value_name = "N")]
    samples: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Select hyperbolic and averaged-domination times along one orbit.
    AnalyzeTimes,
    /// Decide Pesin-style block membership along one orbit.
    Blocks,
    /// Grow and verify a certified local unstable manifold.
    Grow,
    /// Grow nested line-in-plane local manifolds and check inclusion.
    Nested,
    /// Estimate block measures across block lengths by Monte Carlo.
    MeasureSweep,
    /// Generate synthetic sequences, cocycles, and threshold calibrations.
    Synth,
}

impl Command {
    /// The analysis kind this subcommand runs (config `analysis.kind`).
    fn analysis_kind(self) -> &'static str {
        match self {
            Command::AnalyzeTimes => "times",
            Command::Blocks => "blocks",
            Command::Grow => "grow",
            Command::Nested => "nested",
            Command::MeasureSweep => "measure-sweep",
            Command::Synth => "synth",
        }
    }

    fn name(self) -> &'static str {
        match self {
            Command::AnalyzeTimes => "analyze-times",
            Command::Blocks => "blocks",
            Command::Grow => "grow",
            Command::Nested => "nested",
            Command::MeasureSweep => "measure-sweep",
            Command::Synth => "synth",
        }
    }
}

fn main() -> ExitCode {
    run(Cli::parse())
}

fn run(cli: Cli) -> ExitCode {
    let Some(config_path) = &cli.config else {
        eprintln!("config error at /: --config <PATH> is required");
        return ExitCode::from(EXIT_CONFIG_ERROR);
    };

    let mut config = match ExperimentConfig::load(config_path) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG_ERROR);
        }
    };

    // The subcommand and the config must agree on the analysis; a config
    // without one is a manifest-only run and any subcommand may carry it.
    if let Some(analysis) = &config.analysis {
        if analysis.kind() != cli.command.analysis_kind() {
            eprintln!(
                "config error at /analysis/kind: subcommand `{}` runs `{}` analyses, \
                 but the config declares `{}`",
                cli.command.name(),
                cli.command.analysis_kind(),
                analysis.kind()
            );
            return ExitCode::from(EXIT_CONFIG_ERROR);
        }
    }

    let overrides = Overrides {
        seed: cli.seed,
        horizon: cli.horizon,
        samples: cli.samples,
    };
    if let Err(e) = apply_overrides(&mut config, &overrides) {
        eprintln!("{e}");
        return ExitCode::from(EXIT_CONFIG_ERROR);
    }
    if let Err(e) = config.validate() {
        eprintln!("{e}");
        return ExitCode::from(EXIT_CONFIG_ERROR);
    }

    let Some(out_dir) = cli.out.clone().or_else(|| config.out_dir.clone()) else {
        eprintln!("config error at /out_dir: no output directory (set out_dir or pass --out)");
        return ExitCode::from(EXIT_CONFIG_ERROR);
    };

    match run_experiment(&config, &out_dir) {
        Ok(outcome) => {
            println!(
                "wrote {} artifact(s) to {}",
                outcome.files.len(),
                out_dir.display()
            );
            for line in &outcome.expectation_lines {
                println!("{line}");
            }
            if outcome.passed() {
                println!("verdict: PASS");
                ExitCode::from(EXIT_PASS)
            } else {
                println!(
                    "verdict: FAIL ({} expectation(s) violated)",
                    outcome.failures
                );
                ExitCode::from(EXIT_EXPECTATION_FAIL)
            }
        }
        Err(e) => {
            eprintln!("runtime error: {e:#}");
            ExitCode::from(EXIT_RUNTIME_ERROR)
        }
    }
}
