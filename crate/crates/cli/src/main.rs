//! `rhythm`: generate, train, evaluate, stream and inspect from one
//! binary. Every command derives its randomness from the `--seed` flag
//! and writes a run manifest before any other artifact, so a rerun
//! with the same inputs and seed reproduces the outputs byte for byte
//! (manifest timestamps aside).

mod eval;
mod generate;
mod inspect;
mod manifest;
mod records;
mod stream;
mod train;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rhythm_core::interpret::InterpretError;
use rhythm_core::metrics::MetricsError;
use rhythm_core::nn::NnError;
use rhythm_core::signal::SignalError;
use rhythm_core::synth::SynthError;
use rhythm_core::train::TrainError;

#[derive(Parser)]
#[command(name = "rhythm", version, about = "Streaming rhythm classification toolkit")]
struct Cli {
    /// RNG seed; every random draw in a command derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for output artifacts (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Inference precision; training always runs in f64.
    #[arg(long, global = true, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic dataset.
    Generate(generate::GenerateArgs),
    /// Train the classifier on a directory of records.
    Train(train::TrainArgs),
    /// Evaluate a model: ROC, operating points, Brier, episode harness.
    Eval(eval::EvalArgs),
    /// Stream a record (or stdin samples) through a model, one
    /// `t_s,p` line per output.
    Stream(stream::StreamArgs),
    /// Interpretation reports: filters, channel orderings, embeddings.
    Inspect(inspect::InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

/// Global flags shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub out: PathBuf,
    pub precision: Precision,
}

/// Process-level failure classes, one per documented exit code:
/// 2 usage/config, 3 undefined metric, 4 data integrity. Each carries
/// the complete message.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Undefined(String),
    Integrity(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Undefined(_) => 3,
            CliError::Integrity(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (CliError::Usage(m) | CliError::Undefined(m) | CliError::Integrity(m)) = self;
        f.write_str(m)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io error: {e}"))
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::Argument(_) | SignalError::Io(_) => CliError::Usage(e.to_string()),
            SignalError::Format(_) | SignalError::Integrity(_) | SignalError::Version(_) => {
                CliError::Integrity(e.to_string())
            }
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Signal(inner) => inner.into(),
            SynthError::Argument(_) | SynthError::Config(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Format(_) | NnError::Version(_) => CliError::Integrity(e.to_string()),
            NnError::Argument(_) | NnError::Shape(_) | NnError::Io(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Nn(inner) => inner.into(),
            TrainError::Signal(inner) => inner.into(),
            TrainError::NonFinite(_) => CliError::Integrity(e.to_string()),
            TrainError::Argument(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Synth(inner) => inner.into(),
            MetricsError::Nn(inner) => inner.into(),
            MetricsError::Undefined(_) => CliError::Undefined(e.to_string()),
            MetricsError::Argument(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<InterpretError> for CliError {
    fn from(e: InterpretError) -> Self {
        match e {
            InterpretError::Nn(inner) => inner.into(),
            InterpretError::Argument(_) => CliError::Usage(e.to_string()),
        }
    }
}

/// Two comma-separated floats, for clap range flags.
pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let lo = lo.trim().parse().map_err(|_| format!("bad number `{lo}`"))?;
    let hi = hi.trim().parse().map_err(|_| format!("bad number `{hi}`"))?;
    Ok((lo, hi))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx { seed: cli.seed, out: cli.out, precision: cli.precision };
    match cli.command {
        Command::Generate(args) => generate::run(&ctx, &args),
        Command::Train(args) => train::run(&ctx, &args),
        Command::Eval(args) => eval::run(&ctx, &args),
        Command::Stream(args) => stream::run(&ctx, &args),
        Command::Inspect(args) => inspect::run(&ctx, &args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
