use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nesh_cli::commands::{self, CliError, GenDosArgs, RunArgs};
use nesh_cli::RunConfig;

/// Quantized distributed Nash-equilibrium seeking under DoS attacks.
#[derive(Parser)]
#[command(name = "nesh", version)]
struct Cli {
    /// Run configuration (TOML); the built-in default scenario when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the design constants and print them.
    Tune,
    /// Generate a random DoS trace and report its certification.
    GenDos {
        /// Target fraction of time under attack, in [0, 1).
        #[arg(long)]
        duty: Option<f64>,
        /// Mean off+on period in seconds.
        #[arg(long)]
        period: Option<f64>,
        /// Trace length in seconds; defaults to the configured run length.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Trace file to write.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Window grid resolution for certification; defaults to 0.01 x the sampling period.
        #[arg(long)]
        resolution: Option<f64>,
        /// Extra tau_D values to certify eta against.
        #[arg(long, value_delimiter = ',')]
        tau_d: Vec<f64>,
        /// Extra T values to certify kappa against.
        #[arg(long = "t", value_delimiter = ',')]
        t_param: Vec<f64>,
    },
    /// Simulate the protocol and write a CSV trajectory.
    Run {
        /// DoS trace file; overrides the configured attack.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed of the generated DoS trace.
        #[arg(long)]
        seed: Option<u64>,
        /// Keep every N-th step in the CSV.
        #[arg(long)]
        decimation: Option<u64>,
        /// Run this many consecutive seeds in parallel and print one summary each.
        #[arg(long)]
        sweep: Option<u64>,
        /// Keep receiver-side decoder copies and check them every step.
        #[arg(long)]
        dual_codec: bool,
    },
    /// Run the oracle-equivalence and invariant suites.
    Verify {
        #[arg(long, default_value_t = 2000)]
        steps: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NESH_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            e.code
        }
    };
    ExitCode::from(code)
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::invalid)?,
        None => RunConfig::default(),
    };
    let mut out = io::stdout().lock();
    match &cli.command {
        Command::Tune => commands::cmd_tune(&cfg, &mut out),
        Command::GenDos { duty, period, horizon, seed, out: path, resolution, tau_d, t_param } => {
            let args = GenDosArgs {
                duty: duty.or(cfg.dos.duty).unwrap_or(0.0),
                period: period.unwrap_or(cfg.dos.period),
                horizon: horizon.unwrap_or_else(|| cfg.horizon_seconds()),
                seed: seed.or(cfg.dos.seed).unwrap_or(cfg.sim.seed),
                out: path.clone(),
                delta: cfg.sim.delta_seconds,
                resolution: resolution.unwrap_or(0.01 * cfg.sim.delta_seconds),
                tau_d_grid: tau_d.clone(),
                t_grid: t_param.clone(),
            };
            commands::cmd_gen_dos(&args, &mut out)
        }
        Command::Run { trace, out: path, seed, decimation, sweep, dual_codec } => {
            let args = RunArgs {
                trace: trace.clone(),
                out: path.clone(),
                seed: *seed,
                decimation: *decimation,
                sweep: *sweep,
                dual_codec: *dual_codec,
            };
            commands::cmd_run(&cfg, &args, &mut out)
        }
        Command::Verify { steps, seed } => commands::cmd_verify(&cfg, *steps, *seed, &mut out),
    }
}
