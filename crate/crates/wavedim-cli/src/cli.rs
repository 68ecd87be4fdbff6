//! Argument surface and subcommand dispatch.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::SweepConfig;
use crate::error::{CliError, CliResult};
use crate::ineq_cmd::{run_ineq, IneqParams};
use crate::report::write_report;
use crate::sweep::{record_dir, run_sweep};

#[derive(Debug, Parser)]
#[command(
    name = "wavedim",
    version,
    about = "Dimension estimates for damped wave systems: spectra, trajectories, \
             exponent sweeps, closed-form bounds, and inequality campaigns."
)]
pub struct Cli {
    /// TOML configuration file; required by every subcommand except ineq-test.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory, overriding the one in the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed override for the single-trajectory subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; 0 keeps the runtime default.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Redo a sweep whose manifest already exists.
    #[arg(long, global = true)]
    pub force: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the eigenvalue table of the configured truncation.
    Spectrum,
    /// Integrate one seeded trajectory at the first damping value.
    Simulate,
    /// Compute one exponent spectrum at the first damping value.
    Lyapunov,
    /// Tabulate the closed-form dimension bounds per damping value.
    Bounds,
    /// Count unstable linearization modes and fit their growth law.
    LowerBound,
    /// Randomized verification campaign for the gradient-family inequalities.
    IneqTest {
        /// Domain dimension of the campaign.
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Family sizes cycle through 1..=n_max.
        #[arg(long, default_value_t = 32)]
        n_max: usize,
        /// Number of seeded families.
        #[arg(long, default_value_t = 1000)]
        seeds: u64,
        /// Quadrature points per axis; default depends on the dimension.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Run the full damping × seed sweep and persist a manifest.
    Sweep,
    /// Summarize a persisted sweep: summary.csv, fits.json, plot.svg.
    Report,
}

fn init_threads(threads: usize) {
    if threads > 0 {
        // A second initialization in the same process keeps the first
        // pool; that only happens in tests driving `run` directly.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn load_config(path: Option<&Path>) -> CliResult<SweepConfig> {
    let path = path.ok_or_else(|| {
        CliError::Config("this subcommand needs --config <file.toml>".into())
    })?;
    let config = SweepConfig::load(path)?;
    config.validate()?;
    Ok(config)
}

fn out_dir(cli_out: Option<&Path>, config: &SweepConfig) -> PathBuf {
    cli_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.output_dir.clone())
}

pub fn run(cli: Cli) -> CliResult<()> {
    init_threads(cli.threads);
    match cli.command {
        Command::IneqTest {
            d,
            n_max,
            seeds,
            grid,
        } => {
            let params = IneqParams {
                dimension: d,
                n_max,
                seeds,
                grid,
            };
            let out = cli.out.unwrap_or_else(|| PathBuf::from("runs"));
            let summary = run_ineq(&params, &out)?;
            println!(
                "ineq-test: d = {}, {} seeds, 0 violations, min margin = {}",
                summary.dimension, summary.seeds, summary.min_margin
            );
            Ok(())
        }
        Command::Spectrum => {
            let config = load_config(cli.config.as_deref())?;
            commands::cmd_spectrum(&config, &out_dir(cli.out.as_deref(), &config))
        }
        Command::Simulate => {
            let config = load_config(cli.config.as_deref())?;
            commands::cmd_simulate(&config, &out_dir(cli.out.as_deref(), &config), cli.seed)
        }
        Command::Lyapunov => {
            let config = load_config(cli.config.as_deref())?;
            commands::cmd_lyapunov(&config, &out_dir(cli.out.as_deref(), &config), cli.seed)
        }
        Command::Bounds => {
            let config = load_config(cli.config.as_deref())?;
            commands::cmd_bounds(&config, &out_dir(cli.out.as_deref(), &config))
        }
        Command::LowerBound => {
            let config = load_config(cli.config.as_deref())?;
            commands::cmd_lower_bound(&config, &out_dir(cli.out.as_deref(), &config))
        }
        Command::Sweep => {
            let config = load_config(cli.config.as_deref())?;
            let run = run_sweep(&config, cli.out.as_deref(), cli.force)?;
            if run.skipped {
                println!(
                    "sweep: manifest already present at {}, nothing to do (use --force to redo)",
                    run.dir.display()
                );
            } else {
                println!("sweep: wrote {}", run.dir.join("manifest.json").display());
            }
            for result in &run.record.results {
                println!(
                    "  gamma = {}: KY dimension = {}, tangents = {}",
                    result.gamma, result.ky_dimension, result.tangent_count
                );
            }
            for failure in &run.record.failures {
                eprintln!("  gamma = {} failed: {}", failure.gamma, failure.error);
            }
            if !run.record.failures.is_empty() {
                return Err(CliError::PartialSweep {
                    failed: run.record.failures.len(),
                    total: run.record.failures.len() + run.record.results.len(),
                });
            }
            Ok(())
        }
        Command::Report => {
            let config = load_config(cli.config.as_deref())?;
            let dir = record_dir(&config, cli.out.as_deref());
            let record = crate::sweep::load_record(&dir)?;
            write_report(&record, &dir)?;
            println!(
                "report: wrote summary.csv, fits.json{} under {}",
                if record.results.is_empty() {
                    ""
                } else {
                    ", plot.svg"
                },
                dir.display()
            );
            Ok(())
        }
    }
}
