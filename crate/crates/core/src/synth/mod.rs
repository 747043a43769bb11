//! Synthetic PPG-like record generation.
//!
//! Two rhythm classes are modelled: normal sinus rhythm (a base period
//! modulated by a slow respiratory sinusoid plus small Gaussian jitter)
//! and atrial fibrillation (i.i.d. log-normal RR intervals with a large
//! coefficient of variation). Pulses are rendered as a two-Gaussian
//! template (systolic bump plus a delayed, scaled dicrotic bump) with
//! per-beat amplitude jitter and additive sensor noise.
//!
//! None of this pretends to be physiologically faithful; it preserves
//! the statistical structure the classifier must exploit (irregular vs.
//! regular inter-beat timing under varying morphology and noise).

mod config;
mod dataset;
mod render;
mod rr;
mod splice;

pub use config::{GeneratorConfig, ParamRange};
pub use dataset::gen_dataset;
pub use render::render_ppg;
pub use rr::gen_rr_intervals;
pub use splice::{splice_records, DEFAULT_CROSS_FADE_S};

use thiserror::Error;

use crate::signal::SignalError;

/// Errors raised by the generators.
#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("generator config error: {0}")]
    Config(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Rhythm class of a generated record or segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhythmKind {
    Nsr,
    AFib,
}

impl RhythmKind {
    /// Ground-truth label value for this class.
    pub fn label(self) -> u8 {
        match self {
            RhythmKind::Nsr => 0,
            RhythmKind::AFib => 1,
        }
    }
}

/// Default class bounds on the RR coefficient of variation. Custom
/// models may use other thresholds, but AFib variability must stay
/// above NSR variability (see [`GeneratorConfig::validate`]).
pub const NSR_MAX_CV: f64 = 0.08;
pub const AFIB_MIN_CV: f64 = 0.15;

/// Inter-beat timing model for one rhythm class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhythmModel {
    pub kind: RhythmKind,
    pub mean_bpm: f64,
    /// Coefficient of variation of the RR intervals.
    pub rr_variability: f64,
    /// Respiratory modulation depth in [0,1]; ignored for AFib.
    pub respiratory_mod_depth: f64,
}

impl RhythmModel {
    /// NSR model, enforcing the default class bound `cv <= NSR_MAX_CV`.
    pub fn nsr(mean_bpm: f64, rr_variability: f64, respiratory_mod_depth: f64) -> Result<Self, SynthError> {
        let m = Self { kind: RhythmKind::Nsr, mean_bpm, rr_variability, respiratory_mod_depth };
        m.validate()?;
        if rr_variability > NSR_MAX_CV {
            return Err(SynthError::Argument(format!(
                "NSR rr_variability {rr_variability} exceeds {NSR_MAX_CV}"
            )));
        }
        Ok(m)
    }

    /// AFib model, enforcing the default class bound `cv >= AFIB_MIN_CV`.
    pub fn afib(mean_bpm: f64, rr_variability: f64) -> Result<Self, SynthError> {
        let m = Self { kind: RhythmKind::AFib, mean_bpm, rr_variability, respiratory_mod_depth: 0.0 };
        m.validate()?;
        if rr_variability < AFIB_MIN_CV {
            return Err(SynthError::Argument(format!(
                "AFib rr_variability {rr_variability} below {AFIB_MIN_CV}"
            )));
        }
        Ok(m)
    }

    /// Checks the hard invariants (rate range, non-negative variability,
    /// modulation depth in [0,1]) without the class-default CV bounds.
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(30.0..=220.0).contains(&self.mean_bpm) {
            return Err(SynthError::Argument(format!(
                "mean_bpm must be in [30, 220], got {}",
                self.mean_bpm
            )));
        }
        if !(self.rr_variability >= 0.0) {
            return Err(SynthError::Argument(format!(
                "rr_variability must be non-negative, got {}",
                self.rr_variability
            )));
        }
        if !(0.0..=1.0).contains(&self.respiratory_mod_depth) {
            return Err(SynthError::Argument(format!(
                "respiratory_mod_depth must be in [0,1], got {}",
                self.respiratory_mod_depth
            )));
        }
        Ok(())
    }
}

/// Pulse shape parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorphologyModel {
    /// Gaussian sigma of the systolic bump, seconds.
    pub systolic_width_s: f64,
    /// Delay of the dicrotic bump behind the systolic peak, seconds.
    pub dicrotic_delay_s: f64,
    /// Dicrotic amplitude relative to the systolic bump, in [0,1).
    pub dicrotic_ratio: f64,
    /// Coefficient of variation of per-beat amplitude.
    pub amplitude_jitter: f64,
}

impl MorphologyModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.systolic_width_s > 0.0) {
            return Err(SynthError::Argument(format!(
                "systolic_width_s must be positive, got {}",
                self.systolic_width_s
            )));
        }
        if !(self.dicrotic_delay_s >= 0.0) {
            return Err(SynthError::Argument(format!(
                "dicrotic_delay_s must be non-negative, got {}",
                self.dicrotic_delay_s
            )));
        }
        if !(0.0..1.0).contains(&self.dicrotic_ratio) {
            return Err(SynthError::Argument(format!(
                "dicrotic_ratio must be in [0,1), got {}",
                self.dicrotic_ratio
            )));
        }
        if !(self.amplitude_jitter >= 0.0) {
            return Err(SynthError::Argument(format!(
                "amplitude_jitter must be non-negative, got {}",
                self.amplitude_jitter
            )));
        }
        Ok(())
    }
}

/// Additive sensor noise parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub baseline_wander_amp: f64,
    pub baseline_wander_hz: f64,
    pub gaussian_sigma: f64,
    pub dc_offset: f64,
    /// Probability that any given one-second window reads out as zero.
    pub dropout_prob_per_s: f64,
}

impl NoiseModel {
    /// A silent noise model (identity rendering).
    pub fn none() -> Self {
        Self {
            baseline_wander_amp: 0.0,
            baseline_wander_hz: 0.0,
            gaussian_sigma: 0.0,
            dc_offset: 0.0,
            dropout_prob_per_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, v) in [
            ("baseline_wander_amp", self.baseline_wander_amp),
            ("baseline_wander_hz", self.baseline_wander_hz),
            ("gaussian_sigma", self.gaussian_sigma),
        ] {
            if !(v >= 0.0) {
                return Err(SynthError::Argument(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.dc_offset.is_finite() {
            return Err(SynthError::Argument("dc_offset must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.dropout_prob_per_s) {
            return Err(SynthError::Argument(format!(
                "dropout_prob_per_s must be in [0,1], got {}",
                self.dropout_prob_per_s
            )));
        }
        Ok(())
    }
}
