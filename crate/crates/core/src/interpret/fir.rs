//! FIR-filter view of the first convolution layer.

use std::f64::consts::PI;

use super::InterpretError;
use crate::nn::WeightStore;

/// DC gain of a filter in decibels: `20 log10 |sum of taps|`.
/// A zero tap sum yields negative infinity (perfect DC rejection).
pub fn dc_gain_db(taps: &[f64]) -> f64 {
    let sum: f64 = taps.iter().sum();
    20.0 * sum.abs().log10()
}

/// Magnitude of the filter's frequency response on a uniform grid of
/// `n_freq` points spanning [0, fs/2] inclusive.
pub fn magnitude_response(
    taps: &[f64],
    n_freq: usize,
    fs_hz: f64,
) -> Result<Vec<f64>, InterpretError> {
    if taps.is_empty() || !taps.iter().all(|t| t.is_finite()) {
        return Err(InterpretError::Argument("taps must be non-empty and finite".into()));
    }
    if n_freq < 2 {
        return Err(InterpretError::Argument(format!("n_freq must be >= 2, got {n_freq}")));
    }
    if !(fs_hz > 0.0) {
        return Err(InterpretError::Argument(format!("fs_hz must be positive, got {fs_hz}")));
    }
    Ok((0..n_freq)
        .map(|i| {
            // f = i/(n_freq-1) * fs/2, so omega*k = pi * i/(n_freq-1) * k.
            let omega = PI * i as f64 / (n_freq - 1) as f64;
            let mut re = 0.0;
            let mut im = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                re += t * (omega * k as f64).cos();
                im -= t * (omega * k as f64).sin();
            }
            re.hypot(im)
        })
        .collect())
}

/// FIR analysis of one first-layer channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFilter {
    pub channel: usize,
    /// May be negative infinity; serialized as `-inf`.
    pub dc_gain_db: f64,
    pub magnitude_response: Vec<f64>,
}

/// FIR analysis of every first-layer channel on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub freqs_hz: Vec<f64>,
    pub channels: Vec<ChannelFilter>,
}

impl FilterReport {
    /// One row per channel: `channel,dc_gain_db` plus one magnitude
    /// column per grid frequency.
    pub fn csv(&self) -> String {
        let mut out = String::from("channel,dc_gain_db");
        for f in &self.freqs_hz {
            out.push_str(&format!(",mag_{f}hz"));
        }
        out.push('\n');
        for ch in &self.channels {
            out.push_str(&format!("{},{}", ch.channel, ch.dc_gain_db));
            for m in &ch.magnitude_response {
                out.push_str(&format!(",{m}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Analyzes the first conv layer of `weights` as FIR filters over the
/// input signal. Requires a single input channel, so each output
/// channel is exactly one filter.
pub fn analyze_filters(
    weights: &WeightStore<f64>,
    n_freq: usize,
    fs_hz: f64,
) -> Result<FilterReport, InterpretError> {
    weights.validate()?;
    if weights.spec.input_channels != 1 {
        return Err(InterpretError::Argument(format!(
            "FIR analysis requires one input channel, got {}",
            weights.spec.input_channels
        )));
    }
    let kernel = &weights.tensors.conv[0].kernel;
    let freqs_hz: Vec<f64> =
        (0..n_freq).map(|i| fs_hz / 2.0 * i as f64 / (n_freq - 1) as f64).collect();
    let channels = (0..kernel.dim().0)
        .map(|c| {
            let taps: Vec<f64> = kernel.index_axis(ndarray::Axis(0), c).row(0).to_vec();
            Ok(ChannelFilter {
                channel: c,
                dc_gain_db: dc_gain_db(&taps),
                magnitude_response: magnitude_response(&taps, n_freq, fs_hz)?,
            })
        })
        .collect::<Result<Vec<_>, InterpretError>>()?;
    Ok(FilterReport { freqs_hz, channels })
}
