//! `biokey`: fingerprint-bound key vault with steward backup.
//!
//! Exit codes: 0 success, 1 usage, 2 no-match or decrypt failure,
//! 3 quorum or recovery failure, 4 I/O.

mod commands;
mod error;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "biokey",
    version,
    about = "Fingerprint-bound private key vault"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enroll a fingerprint and wrap a private key under it.
    Enroll(EnrollArgs),
    /// Unwrap the private key with a fresh scan.
    Unlock(UnlockArgs),
    /// Split the vault across stewards; prints the recovery id.
    Backup(BackupArgs),
    /// Collect shares from stewards and unlock with a fresh scan.
    Restore(RestoreArgs),
    /// Steward service commands.
    Steward {
        #[command(subcommand)]
        command: StewardCommand,
    },
    /// Genuine / impostor evaluation on synthetic templates.
    Eval(EvalArgs),
    /// Generate a demo secp256k1 key pair.
    Keygen(KeygenArgs),
}

#[derive(Debug, Args)]
struct EnrollArgs {
    /// Fingerprint image (PNG, PGM) or minutiae template (.json).
    #[arg(long)]
    input: PathBuf,
    /// Private key file: 64 hex digits or 32 raw bytes.
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Block grid as HxW.
    #[arg(long, default_value = "4x4", value_parser = parse_grid)]
    grid: (usize, usize),
    /// Transform seed; random when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct UnlockArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    vault: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BackupArgs {
    #[arg(long)]
    vault: PathBuf,
    #[arg(long)]
    stewards: PathBuf,
}

#[derive(Debug, Args)]
struct RestoreArgs {
    /// Recovery id printed by `backup`.
    #[arg(long)]
    rid: String,
    #[arg(long)]
    stewards: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the recovered vault file here.
    #[arg(long)]
    vault_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum StewardCommand {
    /// Run a steward until interrupted. Auth token from BIOKEY_STEWARD_TOKEN.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7800")]
        addr: String,
        #[arg(long)]
        data_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Genuine trials.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Impostor trials; defaults to the genuine count.
    #[arg(long)]
    impostors: Option<usize>,
    /// Gaussian jitter sigma in pixels.
    #[arg(long, default_value_t = 3.0)]
    jitter: f64,
    #[arg(long, default_value_t = 0.2)]
    delete: f64,
    #[arg(long, default_value_t = 0.0)]
    spurious: f64,
    #[arg(long, default_value_t = 0.0)]
    flip: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KeygenArgs {
    #[arg(long)]
    out: PathBuf,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|e| format!("{e}"))?;
    let w: usize = w.trim().parse().map_err(|e| format!("{e}"))?;
    if h == 0 || w == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((h, w))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Enroll(a) => commands::enroll(&a.input, &a.key, &a.out, a.grid, a.seed),
        Command::Unlock(a) => commands::unlock(&a.input, &a.vault, &a.out),
        Command::Backup(a) => commands::backup(&a.vault, &a.stewards),
        Command::Restore(a) => commands::restore(
            &a.rid,
            &a.stewards,
            &a.input,
            &a.out,
            a.vault_out.as_deref(),
        ),
        Command::Steward {
            command: StewardCommand::Serve { addr, data_dir },
        } => commands::serve(&addr, &data_dir),
        Command::Eval(a) => commands::eval(commands::EvalOptions {
            trials: a.trials,
            impostors: a.impostors.unwrap_or(a.trials),
            jitter: a.jitter,
            delete: a.delete,
            spurious: a.spurious,
            flip: a.flip,
            seed: a.seed,
            report: a.report,
        }),
        Command::Keygen(a) => commands::keygen(&a.out),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("BIOKEY_LOG")
                .unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("biokey: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
