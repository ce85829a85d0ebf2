//! `binid` — drive identification experiments from the command line.
//!
//! Subcommands: `simulate` (run a configured experiment), `reproduce`
//! (run one of the three bundled example studies), `check` (validate the
//! model assumptions behind a configuration), and `bench` (per-step cost
//! scaling of the estimators). Exit codes: 0 success, 1 runtime failure,
//! 2 configuration error, 3 failed assumption check.

use std::path::PathBuf;
use std::process::ExitCode;

use binid_cli::commands::{
    self, CmdError, cmd_bench, cmd_check, cmd_reproduce_1, cmd_reproduce_2, cmd_reproduce_3,
    cmd_simulate,
};
use binid_cli::config::{CliConfig, Overrides, resolve_out_dir};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "binid",
    about = "Identification of FIR systems observed through a binary threshold sensor",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunFlags {
    /// Output directory (falls back to BINID_OUT_DIR, then the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for Monte-Carlo runs (0 = one per CPU).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of Monte-Carlo runs.
    #[arg(long)]
    runs: Option<u64>,
    /// Override the number of observations per run.
    #[arg(long)]
    horizon: Option<u64>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            runs: self.runs,
            horizon: self.horizon,
            seed: self.seed,
            workers: self.workers,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo experiment described by a config file.
    Simulate {
        /// Path to the TOML configuration.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run one of the bundled example studies (1, 2, or 3).
    Reproduce {
        /// Which study: 1 (scalar-gain convergence and rate), 2
        /// (first-order efficiency curves), 3 (error moment vs the lower
        /// bound, plus the wall-clock comparison).
        example: u8,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Validate the model assumptions behind a config file.
    Check {
        /// Path to the TOML configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Measure per-step estimator cost across dimensions.
    Bench {
        /// Output directory (falls back to BINID_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run() -> Result<(), CmdError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, flags } => {
            let cfg = CliConfig::load(&config).map_err(CmdError::Config)?;
            let out = resolve_out_dir(
                flags.out.as_deref(),
                commands::config_out_dir(&cfg).as_deref(),
            );
            cmd_simulate(&cfg, &flags.overrides(), &out)
        }
        Command::Reproduce { example, flags } => {
            let out = resolve_out_dir(flags.out.as_deref(), None);
            let overrides = flags.overrides();
            let workers = flags.workers.unwrap_or(0);
            match example {
                1 => cmd_reproduce_1(&overrides, &out, workers),
                2 => cmd_reproduce_2(&overrides, &out, workers),
                3 => cmd_reproduce_3(&overrides, &out, workers),
                other => Err(CmdError::Config(format!(
                    "unknown example `{other}`; expected 1, 2, or 3"
                ))),
            }
        }
        Command::Check { config } => {
            let cfg = CliConfig::load(&config).map_err(CmdError::Config)?;
            cmd_check(&cfg, &Overrides::default())
        }
        Command::Bench { out } => {
            let out = resolve_out_dir(out.as_deref(), None);
            cmd_bench(&out)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
