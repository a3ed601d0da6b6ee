//! Batch front-end for the Lyapunov-Perron solvers: reads a TOML run
//! configuration, executes one subcommand and writes CSV/JSON/SVG artifacts.
//! The process exits 0 exactly when every gate of the subcommand passed.

mod artifacts;
mod commands;
mod config;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "perron",
    about = "Random center-unstable manifolds and center-stable foliations of semilinear stochastic evolution equations, computed by Lyapunov-Perron fixed points",
    version
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,

    /// Override the noise seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for grids and seed batches (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Use the corrected denominator in the shifted foliation condition.
    #[arg(long, global = true)]
    corrected_shift: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample Brownian paths and the stationary process, export CSV.
    SampleNoise,
    /// Evaluate every spectral-gap inequality and write the report.
    CheckGaps,
    /// Solve the center-unstable graph over a grid of base points.
    SolveManifold,
    /// Solve one foliation leaf over a grid of graph coordinates.
    SolveFoliation,
    /// Locate the unique leaf/manifold intersection point.
    Intersect,
    /// Run the quantitative verification battery.
    Verify,
    /// Render a CSV produced by the other commands as SVG.
    Plot {
        /// Input CSV.
        input: PathBuf,
        /// Output SVG (defaults to the input with extension .svg).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring worker pool")?;
    }
    if let Command::Plot { input, output } = &cli.command {
        let ok = commands::cmd_plot(input, output.clone())?;
        if !ok {
            bail!("plot failed");
        }
        return Ok(());
    }
    let config_path = cli
        .config
        .as_ref()
        .context("--config is required for this subcommand")?;
    let mut config = config::RunConfig::load(config_path)?;
    if let Some(seed) = cli.seed {
        config.noise.seed = seed;
    }
    if cli.corrected_shift {
        config.lp.corrected_shift = true;
    }
    let resolved = config.resolve()?;
    let pass = match cli.command {
        Command::SampleNoise => commands::cmd_sample_noise(&resolved, &cli.out)?,
        Command::CheckGaps => commands::cmd_check_gaps(&resolved, &cli.out)?,
        Command::SolveManifold => commands::cmd_solve_manifold(&resolved, &cli.out)?,
        Command::SolveFoliation => commands::cmd_solve_foliation(&resolved, &cli.out)?,
        Command::Intersect => commands::cmd_intersect(&resolved, &cli.out)?,
        Command::Verify => commands::cmd_verify(&resolved, &cli.out)?,
        Command::Plot { .. } => unreachable!(),
    };
    if !pass {
        bail!("one or more gates failed; see the report in {}", cli.out.display());
    }
    Ok(())
}
