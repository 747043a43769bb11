//! Evaluation of probability sequences against binary truth: ROC and
//! AUC, threshold operating points, Brier score, calibration bins,
//! and the minimum-detectable-episode harness.
//!
//! All metrics operate on raw per-output sequences at the model's
//! native rate; there is no per-record or per-subject aggregation.

mod episode;
mod points;
mod roc;

pub use episode::{
    min_detectable_episode, EpisodeOutcome, EpisodeReport, EPISODE_PAD_S, EPISODE_TOLERANCE_S,
};
pub use points::{brier, operating_point, reliability_bins, OperatingPoint, ReliabilityBin};
pub use roc::{roc, RocCurve};

use thiserror::Error;

use crate::nn::NnError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid argument: {0}")]
    Argument(String),
    /// The metric has no value on this input (for example a
    /// single-class label set).
    #[error("undefined metric: {0}")]
    Undefined(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Shared validation: equal-length non-empty sequences, probabilities
/// in [0,1], labels in {0,1}.
pub(crate) fn check_pairs(probs: &[f64], labels: &[f64]) -> Result<(), MetricsError> {
    if probs.len() != labels.len() {
        return Err(MetricsError::Argument(format!(
            "probability/label length mismatch: {} vs {}",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(MetricsError::Argument("empty input".into()));
    }
    for (j, &p) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(MetricsError::Argument(format!(
                "probability out of [0,1] at index {j}: {p}"
            )));
        }
    }
    for (j, &y) in labels.iter().enumerate() {
        if y != 0.0 && y != 1.0 {
            return Err(MetricsError::Argument(format!(
                "label out of {{0,1}} at index {j}: {y}"
            )));
        }
    }
    Ok(())
}
