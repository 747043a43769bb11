//! From-scratch training: class-weighted BCE, exact backpropagation,
//! Adam, plateau learning-rate annealing, and the augmentation recipe
//! (random cropping, scaling, shifts, additive Gaussian noise).
//!
//! Loss convention: binary cross-entropy is summed over the outputs of
//! each example and averaged over the examples of a batch, so gradient
//! scale is independent of batch size while per-example losses keep the
//! summed-over-outputs reading. Reported history losses are normalised
//! to mean-per-output for comparability across example lengths.

mod adam;
mod augment;
mod backprop;
mod fit;
mod loss;
mod scheduler;

pub use adam::{adam_step, AdamState};
pub use augment::{
    augment_batch, plan_examples, validation_examples, Example, ExampleRef,
};
pub use backprop::{backward, batch_loss, BatchStats, GradientStore, Realization};
pub use fit::{fit, fit_observed, history_csv, EpochStats, FitResult};
pub use loss::{auto_class_weights, weighted_bce, BCE_CLAMP_EPS};
pub use scheduler::PlateauScheduler;

use thiserror::Error;

use crate::nn::NnError;
use crate::signal::SignalError;

/// Batch-norm running-statistics momentum used in training mode.
pub const BN_MOMENTUM: f64 = 0.9;

/// Errors raised during training.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite loss: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Class-weighting mode for the BCE loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassWeights {
    /// `w_c = N / (2 * N_c)` computed over the training split targets.
    Auto,
    Fixed(f64, f64),
}

/// Training loop configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Length of training subsequences, a multiple of the model's
    /// total pooling factor.
    pub example_len_samples: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub initial_lr: f64,
    pub lr_decay_factor: f64,
    pub plateau_patience_epochs: usize,
    pub class_weights: ClassWeights,
    pub lstm_dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            example_len_samples: 1920,
            batch_size: 16,
            max_epochs: 30,
            initial_lr: 2e-3,
            lr_decay_factor: 0.5,
            plateau_patience_epochs: 2,
            class_weights: ClassWeights::Auto,
            lstm_dropout_rate: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, total_pool: usize) -> Result<(), TrainError> {
        if self.example_len_samples == 0 || !self.example_len_samples.is_multiple_of(total_pool) {
            return Err(TrainError::Argument(format!(
                "example_len_samples {} must be a positive multiple of {total_pool}",
                self.example_len_samples
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Argument("batch_size must be >= 1".into()));
        }
        if !(self.initial_lr > 0.0) {
            return Err(TrainError::Argument(format!(
                "initial_lr must be positive, got {}",
                self.initial_lr
            )));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return Err(TrainError::Argument(format!(
                "lr_decay_factor must be in (0,1), got {}",
                self.lr_decay_factor
            )));
        }
        if self.plateau_patience_epochs == 0 {
            return Err(TrainError::Argument("plateau_patience_epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.lstm_dropout_rate) {
            return Err(TrainError::Argument(format!(
                "lstm_dropout_rate must be in [0,1), got {}",
                self.lstm_dropout_rate
            )));
        }
        if let ClassWeights::Fixed(w0, w1) = self.class_weights {
            if !(w0 > 0.0 && w1 > 0.0) {
                return Err(TrainError::Argument(format!(
                    "fixed class weights must be positive, got ({w0}, {w1})"
                )));
            }
        }
        Ok(())
    }
}

/// Augmentation configuration; all draws are uniform over the given
/// ranges, per example by default.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    /// Re-offset each example uniformly within its source record.
    pub crop: bool,
    pub scale_range: (f64, f64),
    pub shift_range: (f64, f64),
    pub noise_sigma_range: (f64, f64),
    /// Draw fresh scale/shift/sigma per example (one draw per batch
    /// when false).
    pub per_example: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            crop: true,
            scale_range: (0.7, 1.3),
            shift_range: (-0.5, 0.5),
            noise_sigma_range: (0.0, 0.15),
            per_example: true,
        }
    }
}

impl AugmentConfig {
    /// Identity augmentation.
    pub fn none() -> Self {
        Self {
            crop: false,
            scale_range: (1.0, 1.0),
            shift_range: (0.0, 0.0),
            noise_sigma_range: (0.0, 0.0),
            per_example: true,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let ranges = [
            ("scale_range", self.scale_range),
            ("shift_range", self.shift_range),
            ("noise_sigma_range", self.noise_sigma_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(TrainError::Argument(format!(
                    "{name} [{lo}, {hi}] is not a valid interval"
                )));
            }
        }
        if !(self.scale_range.0 > 0.0) {
            return Err(TrainError::Argument(format!(
                "scale_range must be positive, got lo = {}",
                self.scale_range.0
            )));
        }
        if !(self.noise_sigma_range.0 >= 0.0) {
            return Err(TrainError::Argument(format!(
                "noise_sigma_range must be non-negative, got lo = {}",
                self.noise_sigma_range.0
            )));
        }
        Ok(())
    }
}
