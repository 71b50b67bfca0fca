//! `mmbl`: solver runs and verification studies for magneto-micropolar
//! boundary layers.
//!
//! Exit status is 0 when every executed check passes, 1 when a check fails
//! or the solver stops with an error, and 2 for usage errors and unreadable
//! configurations. Failed checks are printed as `FAIL\t<name>\t<detail>`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmbl_core::Error;

#[derive(Debug, Parser)]
#[command(name = "mmbl", version, about = "Magneto-micropolar boundary-layer solver")]
struct Cli {
    /// Output directory; overrides MMBL_OUTDIR.
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Outflow trace, Picard iteration, inverse transform, residuals and
    /// energy envelope.
    Run(commands::RunArgs),
    /// Outflow trace only, with the constant-state and translation checks.
    Bernoulli(commands::BernoulliArgs),
    /// Manufactured-solution convergence study of the linear step.
    Mms(commands::MmsArgs),
    /// Forward/inverse stream-map refinement study.
    TransformRoundtrip(commands::RoundTripArgs),
    /// Coefficient identities on random admissible states and the
    /// Sobolev-ratio family.
    CheckInvariants(commands::InvariantArgs),
    /// Reprint a stored certificate.
    Report(commands::ReportArgs),
}

fn outdir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("MMBL_OUTDIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mmbl-out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let dir = outdir(cli.outdir);
    let (name, result) = match cli.command {
        Command::Run(a) => ("run", commands::run(&a, &dir)),
        Command::Bernoulli(a) => ("bernoulli", commands::bernoulli(&a, &dir)),
        Command::Mms(a) => ("mms", commands::mms(&a, &dir)),
        Command::TransformRoundtrip(a) => ("transform-roundtrip", commands::round_trip(&a, &dir)),
        Command::CheckInvariants(a) => ("check-invariants", commands::invariants(&a, &dir)),
        Command::Report(a) => ("report", commands::report(&a)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ (Error::ConfigNotFound(_) | Error::ConfigAt { .. } | Error::Config(_))) => {
            eprintln!("mmbl {name}: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            println!("FAIL\t{name}\t{e}");
            eprintln!("mmbl {name}: {e}");
            ExitCode::from(1)
        }
    }
}
