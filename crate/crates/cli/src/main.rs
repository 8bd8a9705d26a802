use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chestnut_core::config::{InvocationMode, SimConfig};
use chestnut_core::pipeline::{self, Inputs};
use chestnut_core::{stats, validate};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "chestnut",
    version,
    about = "Synthesize mobile-edge QoS datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset into an output directory.
    Generate(GenerateArgs),
    /// Recompute the statistics files of an output directory.
    Stats {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Re-check every invariant of an output directory.
    Validate {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML file with simulation parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use generated traces and stations instead of input files.
    #[arg(long, conflicts_with_all = ["gps", "stations"])]
    synthetic: bool,
    /// Raw GPS log (vehicle, time, lon, lat, speed, direction).
    #[arg(long, requires = "stations")]
    gps: Option<PathBuf>,
    /// Base-station site list (lon, lat).
    #[arg(long, requires = "gps")]
    stations: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = ["full", "sampled"])]
    mode: Option<String>,
    #[arg(long)]
    services_per_snapshot: Option<usize>,
}

fn generate(args: GenerateArgs) -> Result<()> {
    let GenerateArgs {
        config,
        seed,
        synthetic,
        gps,
        stations,
        out,
        mode,
        services_per_snapshot,
    } = args;
    let mut cfg = match &config {
        Some(path) => {
            SimConfig::from_path(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => SimConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(mode) = mode {
        cfg.mode = mode.parse::<InvocationMode>()?;
    }
    if let Some(m) = services_per_snapshot {
        cfg.services_per_snapshot = m;
    }
    let inputs = match (synthetic, gps, stations) {
        (true, _, _) => Inputs::Synthetic,
        (false, Some(gps), Some(stations)) => Inputs::files(gps, stations),
        _ => bail!("either --synthetic or both --gps and --stations are required"),
    };
    let manifest = pipeline::run(&cfg, &inputs, &out).context("generation failed")?;
    let c = manifest.counts;
    println!(
        "wrote {}: {} users, {} servers, {} services, {} invocations",
        out.display(),
        c.users,
        c.servers,
        c.services,
        c.invocations
    );
    Ok(())
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Generate(args) => generate(args)?,
        Command::Stats { dir } => {
            stats::emit_stats_for_dir(&dir)
                .with_context(|| format!("computing statistics for {}", dir.display()))?;
            println!("wrote {}", dir.join(chestnut_core::io::STATS_DIR).display());
        }
        Command::Validate { dir } => {
            let report = validate::validate_dir(&dir)
                .with_context(|| format!("validating {}", dir.display()))?;
            println!("{report}");
            if !report.is_ok() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
