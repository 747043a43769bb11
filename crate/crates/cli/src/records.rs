//! Shared record loading, precision dispatch and the output-time
//! convention.

use std::fs;
use std::path::{Path, PathBuf};

use rhythm_core::nn::{forward_values, ActivationTrace, Scalar, WeightStore};
use rhythm_core::signal::{load_record, Record};

use crate::{CliError, Precision};

/// File extensions the directory loader treats as records.
const RECORD_EXTENSIONS: [&str; 2] = ["rec", "bin"];

/// Loads every record file in `dir` (non-recursive), sorted by file
/// name so downstream ordering is deterministic.
pub fn load_dir(dir: &Path) -> Result<Vec<Record>, CliError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read data dir {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::Usage(format!("cannot list {}: {e}", dir.display())))?
            .path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if path.is_file() && RECORD_EXTENSIONS.contains(&ext) {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "no record files (*.rec, *.bin) in {}",
            dir.display()
        )));
    }
    let mut records = Vec::with_capacity(paths.len());
    for p in &paths {
        records.push(load_record(p)?);
    }
    Ok(records)
}

/// Time of output `j`: the time of the newest sample in its window.
pub fn output_time_s(offset_s: f64, fs_hz: f64, total_pool: usize, j: usize) -> f64 {
    offset_s + (total_pool * (j + 1) - 1) as f64 / fs_hz
}

/// Narrows a validated f64 sample to the inference scalar; a value the
/// narrower type cannot hold is treated as corrupt data.
pub fn to_scalar<F: Scalar>(v: f64) -> Result<F, CliError> {
    let out = F::from_f64(v);
    if !out.is_finite() {
        return Err(CliError::Integrity(format!(
            "sample {v} is not representable at the requested precision"
        )));
    }
    Ok(out)
}

/// Forward pass over a record at the requested precision; the
/// probabilities come back as f64 for metrics and serialisation.
pub fn forward_capture(
    weights: &WeightStore<f64>,
    record: &Record,
    precision: Precision,
    capture: &[&str],
) -> Result<(Vec<f64>, Vec<ActivationTrace>), CliError> {
    let x = &record.samples;
    match precision {
        Precision::F64 => Ok(forward_values(weights, &x.values, x.sample_rate_hz, capture)?),
        Precision::F32 => {
            let w32 = weights.cast::<f32>();
            let x32 = x.values.iter().map(|&v| to_scalar::<f32>(v)).collect::<Result<Vec<_>, _>>()?;
            let (probs, traces) = forward_values(&w32, &x32, x.sample_rate_hz, capture)?;
            Ok((probs.into_iter().map(f64::from).collect(), traces))
        }
    }
}

/// [`forward_capture`] without activation capture.
pub fn forward_probs(
    weights: &WeightStore<f64>,
    record: &Record,
    precision: Precision,
) -> Result<Vec<f64>, CliError> {
    Ok(forward_capture(weights, record, precision, &[])?.0)
}
