//! Streaming convolutional-recurrent rhythm classification for raw
//! PPG-like signals.
//!
//! The crate is organised around the life cycle of a classification
//! experiment:
//!
//! * [`signal`] — core signal/label/record types, record file I/O,
//!   label downsampling and subject-level dataset splitting.
//! * [`synth`] — synthetic generator for labelled NSR/AFib records,
//!   including rhythm splicing for episode-duration studies.
//! * [`nn`] — the conv-recurrent network: batch forward pass and an
//!   exactly-equivalent sample-by-sample streaming mode.
//! * [`train`] — from-scratch backpropagation, Adam, augmentation and
//!   the training loop with plateau learning-rate annealing.
//! * [`metrics`] — ROC/AUC, operating points, Brier score, calibration
//!   bins and the minimum-detectable-episode harness.
//! * [`interpret`] — FIR analysis of first-layer kernels, activation
//!   channel ordering and 2-D embedding projection.

// Validation uses `!(x > 0.0)`-style comparisons so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod interpret;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod signal;
pub mod synth;
pub mod train;
