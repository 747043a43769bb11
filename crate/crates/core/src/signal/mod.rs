//! Core signal and dataset types: raw sample series, rhythm labels,
//! per-subject records and split-tagged datasets.

mod record_io;

pub use record_io::{load_record, save_record_binary, save_record_text, write_atomic};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng::stream_rng;

/// Errors raised by signal types and record I/O.
#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("record format error: {0}")]
    Format(String),
    #[error("record integrity error: {0}")]
    Integrity(String),
    #[error("unsupported record format version {0}")]
    Version(u32),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A raw sensor sample sequence at a fixed sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    pub values: Vec<f64>,
    pub sample_rate_hz: f64,
    pub start_offset_s: f64,
}

impl SampleSeries {
    pub fn new(values: Vec<f64>, sample_rate_hz: f64) -> Result<Self, SignalError> {
        Self::with_offset(values, sample_rate_hz, 0.0)
    }

    pub fn with_offset(
        values: Vec<f64>,
        sample_rate_hz: f64,
        start_offset_s: f64,
    ) -> Result<Self, SignalError> {
        if !(sample_rate_hz > 0.0) {
            return Err(SignalError::Argument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if !(start_offset_s >= 0.0) {
            return Err(SignalError::Argument(format!(
                "start offset must be non-negative, got {start_offset_s}"
            )));
        }
        if values.is_empty() {
            return Err(SignalError::Argument("sample series must be non-empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::Integrity(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self { values, sample_rate_hz, start_offset_s })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time of sample `i` in seconds.
    pub fn time_at(&self, i: usize) -> f64 {
        self.start_offset_s + i as f64 / self.sample_rate_hz
    }
}

/// A label sequence: binary ground truth ({0,1}) or probabilities in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSeries {
    pub values: Vec<f64>,
    pub rate_hz: f64,
}

impl LabelSeries {
    pub fn new(values: Vec<f64>, rate_hz: f64) -> Result<Self, SignalError> {
        if !(rate_hz > 0.0) {
            return Err(SignalError::Argument(format!(
                "label rate must be positive, got {rate_hz}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(SignalError::Argument(format!(
                "label value out of [0,1] at index {i}: {}",
                values[i]
            )));
        }
        Ok(Self { values, rate_hz })
    }

    /// Binary ground-truth labels (every value 0 or 1).
    pub fn binary(values: Vec<u8>, rate_hz: f64) -> Result<Self, SignalError> {
        if let Some(i) = values.iter().position(|&v| v > 1) {
            return Err(SignalError::Argument(format!(
                "binary label out of {{0,1}} at index {i}: {}",
                values[i]
            )));
        }
        Self::new(values.into_iter().map(f64::from).collect(), rate_hz)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// Provenance of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTag {
    Synthetic,
    Imported,
}

impl SourceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::Synthetic => "synthetic",
            SourceTag::Imported => "imported",
        }
    }

    pub fn parse(s: &str) -> Result<Self, SignalError> {
        match s {
            "synthetic" => Ok(SourceTag::Synthetic),
            "imported" => Ok(SourceTag::Imported),
            other => Err(SignalError::Format(format!("unknown source tag `{other}`"))),
        }
    }
}

/// One contiguous recording from a single subject, with ground truth at
/// the sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub subject_id: String,
    pub samples: SampleSeries,
    pub truth: LabelSeries,
    pub source_tag: SourceTag,
}

impl Record {
    pub fn new(
        subject_id: impl Into<String>,
        samples: SampleSeries,
        truth: LabelSeries,
        source_tag: SourceTag,
    ) -> Result<Self, SignalError> {
        if truth.len() != samples.len() {
            return Err(SignalError::Integrity(format!(
                "truth length {} does not match sample length {}",
                truth.len(),
                samples.len()
            )));
        }
        if truth.rate_hz != samples.sample_rate_hz {
            return Err(SignalError::Integrity(format!(
                "truth rate {} Hz does not match sample rate {} Hz",
                truth.rate_hz, samples.sample_rate_hz
            )));
        }
        Ok(Self { subject_id: subject_id.into(), samples, truth, source_tag })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.samples.sample_rate_hz
    }
}

/// Split membership of a record within a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitTag {
    Train,
    Validation,
    Test,
    Unsplit,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Validation => "validation",
            SplitTag::Test => "test",
            SplitTag::Unsplit => "unsplit",
        }
    }
}

/// A collection of records with per-record split assignments.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<(Record, SplitTag)>,
}

impl Dataset {
    pub fn unsplit(records: Vec<Record>) -> Self {
        Self { records: records.into_iter().map(|r| (r, SplitTag::Unsplit)).collect() }
    }

    pub fn records_in(&self, tag: SplitTag) -> Vec<&Record> {
        self.records.iter().filter(|(_, t)| *t == tag).map(|(r, _)| r).collect()
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.records.iter().map(|(r, _)| r.subject_id.as_str()).collect()
    }
}

/// Reduces a label sequence by an integer ratio using per-window
/// majority vote. Ties break toward label 1.
///
/// Output element `j` summarises the input window `[j*ratio, (j+1)*ratio)`;
/// a trailing partial window is dropped.
pub fn downsample_labels(truth: &LabelSeries, ratio: usize) -> Result<LabelSeries, SignalError> {
    if ratio == 0 {
        return Err(SignalError::Argument("downsample ratio must be >= 1".into()));
    }
    if !truth.is_binary() {
        return Err(SignalError::Argument(
            "downsample_labels expects binary ground-truth labels".into(),
        ));
    }
    let n_out = truth.len() / ratio;
    let mut out = Vec::with_capacity(n_out);
    for j in 0..n_out {
        let window = &truth.values[j * ratio..(j + 1) * ratio];
        let ones = window.iter().filter(|&&v| v == 1.0).count();
        out.push(if 2 * ones >= ratio { 1.0 } else { 0.0 });
    }
    LabelSeries::new(out, truth.rate_hz / ratio as f64)
}

/// Assigns every subject (and all of its records) to exactly one of
/// train/validation/test, deterministically in `(subject set, fractions, seed)`.
///
/// `fractions` are the train and validation shares; the remainder is the
/// test split. Subject counts are rounded to the nearest integer with at
/// least one subject per requested split.
pub fn split_by_subject(
    dataset: Dataset,
    fractions: (f64, f64),
    seed: u64,
) -> Result<Dataset, SignalError> {
    let (train_frac, val_frac) = fractions;
    if !(train_frac > 0.0 && val_frac > 0.0) {
        return Err(SignalError::Argument("split fractions must be positive".into()));
    }
    if train_frac + val_frac > 1.0 + 1e-12 {
        return Err(SignalError::Argument("split fractions must sum to at most 1".into()));
    }

    let subjects: BTreeSet<String> =
        dataset.records.iter().map(|(r, _)| r.subject_id.clone()).collect();
    let n = subjects.len();
    if n < 3 {
        return Err(SignalError::Argument(format!(
            "need at least 3 subjects to form 3 splits, got {n}"
        )));
    }

    let mut ordered: Vec<String> = subjects.into_iter().collect();
    let mut rng = stream_rng(seed, "signal.split_by_subject");
    ordered.shuffle(&mut rng);

    let mut n_train = (train_frac * n as f64).round().max(1.0) as usize;
    let mut n_val = (val_frac * n as f64).round().max(1.0) as usize;
    // Keep at least one subject in the test split.
    while n_train + n_val >= n {
        if n_train >= n_val && n_train > 1 {
            n_train -= 1;
        } else if n_val > 1 {
            n_val -= 1;
        } else {
            break;
        }
    }
    if n_train + n_val >= n {
        return Err(SignalError::Argument(format!(
            "cannot assign 3 non-empty splits over {n} subjects"
        )));
    }

    let mut assignment: BTreeMap<String, SplitTag> = BTreeMap::new();
    for (i, subject) in ordered.into_iter().enumerate() {
        let tag = if i < n_train {
            SplitTag::Train
        } else if i < n_train + n_val {
            SplitTag::Validation
        } else {
            SplitTag::Test
        };
        assignment.insert(subject, tag);
    }

    let records = dataset
        .records
        .into_iter()
        .map(|(r, _)| {
            let tag = assignment[&r.subject_id];
            (r, tag)
        })
        .collect();
    Ok(Dataset { records })
}
