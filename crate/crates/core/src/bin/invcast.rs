use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use invcast::config::{validate, LoadedConfig};
use invcast::pipeline;

/// Score demand forecasts by the inventory cost they cause.
#[derive(Parser)]
#[command(name = "invcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit, forecast, simulate and write every report.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Write the feature matrix of the configured panel to `features.csv`.
    ExportFeatures { config: PathBuf },
    /// Check an external forecast file against the test window and score it.
    ImportForecasts {
        config: PathBuf,
        file: PathBuf,
        /// Model name used in the report.
        #[arg(long, default_value = "external")]
        name: String,
    },
}

const EXIT_INVALID: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn load(path: &Path) -> Result<LoadedConfig, ExitCode> {
    let diags = validate(path);
    if diags.is_empty() {
        LoadedConfig::from_path(path).map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        })
    } else {
        for d in &diags {
            eprintln!("invalid: {d}");
        }
        Err(ExitCode::from(EXIT_INVALID))
    }
}

fn execute(command: Command) -> Result<(), ExitCode> {
    let runtime = |e: anyhow::Error| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_RUNTIME)
    };
    match command {
        Command::Validate { config } => {
            load(&config)?;
            println!("{}: ok", config.display());
        }
        Command::Run { config } => {
            let loaded = load(&config)?;
            let out = pipeline::run(&loaded)
                .with_context(|| format!("run of {} failed", config.display()))
                .map_err(runtime)?;
            print!("{}", out.report.to_text());
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            println!("outputs written to {}", loaded.config.output_dir.display());
        }
        Command::ExportFeatures { config } => {
            let loaded = load(&config)?;
            let path = pipeline::export_features(&loaded.config).map_err(|e| runtime(e.into()))?;
            println!("{}", path.display());
        }
        Command::ImportForecasts { config, file, name } => {
            let loaded = load(&config)?;
            let report = pipeline::score_external(&loaded.config, &file, &name)
                .with_context(|| format!("forecast file {}", file.display()))
                .map_err(runtime)?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
