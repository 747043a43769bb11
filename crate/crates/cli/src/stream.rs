//! `rhythm stream`: incremental inference, one `t_s,p` line per
//! emitted probability, flushed as soon as it exists.

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::Args;

use rhythm_core::nn::{load_model, Scalar, StreamState, WeightStore};
use rhythm_core::signal::load_record;

use crate::manifest::RunManifest;
use crate::records::{output_time_s, to_scalar};
use crate::{CliError, Ctx, Precision};

#[derive(Args)]
pub struct StreamArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Record file to stream; omit to read `t_s,value` lines from stdin.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Samples pushed per step in record mode.
    #[arg(long, default_value_t = 16)]
    pub chunk: usize,
}

pub fn run(ctx: &Ctx, args: &StreamArgs) -> Result<(), CliError> {
    if args.chunk == 0 {
        return Err(CliError::Usage("chunk must be >= 1".into()));
    }
    let mut config_paths: Vec<&Path> = vec![args.model.as_path()];
    if let Some(r) = &args.record {
        config_paths.push(r);
    }
    RunManifest::new("stream", &config_paths, ctx.seed).write(&ctx.out)?;

    let weights = load_model(&args.model)?;
    match ctx.precision {
        Precision::F64 => stream_with::<f64>(&weights, args),
        Precision::F32 => stream_with::<f32>(&weights.cast(), args),
    }
}

fn stream_with<F: Scalar>(weights: &WeightStore<F>, args: &StreamArgs) -> Result<(), CliError> {
    let mut state = StreamState::new(weights)?;
    let pool = weights.spec.total_pool();
    let stdout = io::stdout();
    let mut out = stdout.lock();

    match &args.record {
        Some(path) => {
            let record = load_record(path)?;
            let fs_hz = record.samples.sample_rate_hz;
            let offset = record.samples.start_offset_s;
            let x = record
                .samples
                .values
                .iter()
                .map(|&v| to_scalar::<F>(v))
                .collect::<Result<Vec<_>, _>>()?;
            let mut emitted = 0usize;
            for chunk in x.chunks(args.chunk) {
                for p in state.push(weights, chunk)? {
                    let t = output_time_s(offset, fs_hz, pool, emitted);
                    if matches!(emit(&mut out, t, p)?, Emit::Closed) {
                        return Ok(());
                    }
                    emitted += 1;
                }
            }
        }
        None => {
            let stdin = io::stdin();
            for line in stdin.lock().lines() {
                let line = line?;
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let (t_s, value) = parse_sample_line(trimmed)?;
                // One sample per line; at most one output pops.
                for p in state.push(weights, &[to_scalar::<F>(value)?])? {
                    if matches!(emit(&mut out, t_s, p)?, Emit::Closed) {
                        return Ok(());
                    }
                }
            }
        }
    }
    Ok(())
}

enum Emit {
    Written,
    Closed,
}

/// One flushed `t,p` line. A consumer that hangs up ends the stream
/// cleanly instead of failing the run.
fn emit<W: Write, P: std::fmt::Display>(out: &mut W, t: f64, p: P) -> Result<Emit, CliError> {
    let line = format!("{t},{p}\n");
    match out.write_all(line.as_bytes()).and_then(|()| out.flush()) {
        Ok(()) => Ok(Emit::Written),
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(Emit::Closed),
        Err(e) => Err(e.into()),
    }
}

/// One stdin sample, `t_s,value`. Non-finite input is corrupt data,
/// not a usage problem.
fn parse_sample_line(line: &str) -> Result<(f64, f64), CliError> {
    let (t, v) = line.split_once(',').ok_or_else(|| {
        CliError::Integrity(format!("bad sample line `{line}`: expected `t_s,value`"))
    })?;
    let t_s: f64 = t
        .trim()
        .parse()
        .map_err(|_| CliError::Integrity(format!("bad timestamp `{t}`")))?;
    let value: f64 = v
        .trim()
        .parse()
        .map_err(|_| CliError::Integrity(format!("bad sample value `{v}`")))?;
    if !t_s.is_finite() || !value.is_finite() {
        return Err(CliError::Integrity(format!("non-finite sample line `{line}`")));
    }
    Ok((t_s, value))
}
