//! `statesynth`: pulse optimization, gradient checks, qubit spectra, and
//! open-boundary simulation driven by a JSON configuration.
//!
//! Exit codes: 0 success, 2 configuration/validation failure, 3 numerical
//! abort, 4 gradient check above threshold, 1 artifact I/O failure.

mod config;
mod runs;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Mode;

#[derive(Parser)]
#[command(name = "statesynth", version, about = "Quantum state preparation runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a control pulse and write results.json / control.csv /
    /// iterations.csv (and snapshots when requested)
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the config's RNG seed for the initial control guess
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare the adjoint gradient against difference quotients; exits 4
    /// when the discrepancy exceeds 1e-4
    Gradcheck {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compute stationary levels and write spectrum.csv
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evolve a fixed control (no optimization) and write snapshots plus a
    /// boundary reflection measure
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common, seed_override) = match &cli.command {
        Command::Solve { common, seed } => (Mode::Solve, common, *seed),
        Command::Gradcheck { common } => (Mode::Gradcheck, common, None),
        Command::Spectrum { common } => (Mode::Spectrum, common, None),
        Command::Simulate { common } => (Mode::Simulate, common, None),
    };

    let raw_text = match fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read config {}: {e}", common.config.display());
            return ExitCode::from(2);
        }
    };
    let raw: serde_json::Value = match serde_json::from_str(&raw_text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("config is not valid JSON: {e}");
            return ExitCode::from(2);
        }
    };

    let cfg = match config::parse(&raw) {
        Ok(c) => c,
        Err(errors) => return report_validation(&errors),
    };
    let seed = seed_override.or(cfg.seed);
    let built = match config::build(&cfg, mode, seed_override) {
        Ok(b) => b,
        Err(errors) => return report_validation(&errors),
    };

    let ctx = runs::Ctx { out: &common.out, mode, seed, echo: &raw };
    ExitCode::from(u8::try_from(runs::execute(built, &ctx)).unwrap_or(1))
}

fn report_validation(errors: &[String]) -> ExitCode {
    eprintln!("configuration invalid ({} problem{}):", errors.len(), plural(errors.len()));
    for e in errors {
        eprintln!("  - {e}");
    }
    ExitCode::from(2)
}

fn plural(n: usize) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}
