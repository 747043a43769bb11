//! Pulse-train rendering of an RR sequence into a sampled record.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{MorphologyModel, NoiseModel, RhythmKind, SynthError};
use crate::rng::stream_rng;
use crate::signal::{LabelSeries, Record, SampleSeries, SourceTag};

/// Bumps are evaluated within this many sigmas of their centre.
const GAUSS_SUPPORT_SIGMAS: f64 = 4.0;

/// Renders one pulse per RR interval at `fs_hz`.
///
/// Each pulse is a unit-height Gaussian systolic bump (sigma from the
/// morphology model, centred shortly after the beat onset) plus a
/// delayed dicrotic copy scaled by `dicrotic_ratio`. Per-beat amplitude
/// is jittered multiplicatively. Noise is applied additively, except
/// dropout which zeroes whole one-second windows. Truth labels are
/// constant and equal to the rhythm class label.
pub fn render_ppg(
    rr: &[f64],
    kind: RhythmKind,
    morph: &MorphologyModel,
    noise: &NoiseModel,
    fs_hz: f64,
    seed: u64,
) -> Result<Record, SynthError> {
    morph.validate()?;
    noise.validate()?;
    if !(fs_hz > 0.0) {
        return Err(SynthError::Argument(format!("fs_hz must be positive, got {fs_hz}")));
    }
    if rr.is_empty() {
        return Err(SynthError::Argument("rr sequence must be non-empty".into()));
    }
    if let Some(&bad) = rr.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(SynthError::Argument(format!("rr intervals must be positive, got {bad}")));
    }

    let duration = rr.iter().sum::<f64>();
    let n = (duration * fs_hz).round() as usize;
    if n == 0 {
        return Err(SynthError::Argument(format!(
            "duration {duration} s at {fs_hz} Hz yields no samples"
        )));
    }

    let mut rng = stream_rng(seed, "synth.render");
    let mut values = vec![0.0f64; n];

    // Beat pulses. Draw order is fixed: amplitudes, wander phase,
    // per-sample noise, dropout.
    let amp_jitter = Normal::new(0.0, 1.0).expect("unit normal");
    let sigma = morph.systolic_width_s;
    let rise = 2.0 * sigma;
    let mut onset = 0.0;
    for &interval in rr {
        let amp = if morph.amplitude_jitter > 0.0 {
            (1.0 + morph.amplitude_jitter * amp_jitter.sample(&mut rng)).max(0.0)
        } else {
            1.0
        };
        for (centre, height) in [
            (onset + rise, amp),
            (onset + rise + morph.dicrotic_delay_s, amp * morph.dicrotic_ratio),
        ] {
            if height == 0.0 {
                continue;
            }
            let lo = ((centre - GAUSS_SUPPORT_SIGMAS * sigma) * fs_hz).floor().max(0.0) as usize;
            let hi = (((centre + GAUSS_SUPPORT_SIGMAS * sigma) * fs_hz).ceil() as usize).min(n);
            for (i, v) in values.iter_mut().enumerate().take(hi).skip(lo) {
                let t = i as f64 / fs_hz;
                *v += height * (-((t - centre) / sigma).powi(2) / 2.0).exp();
            }
        }
        onset += interval;
    }

    if noise.baseline_wander_amp > 0.0 {
        let phase = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        for (i, v) in values.iter_mut().enumerate() {
            let t = i as f64 / fs_hz;
            *v += noise.baseline_wander_amp
                * (2.0 * std::f64::consts::PI * noise.baseline_wander_hz * t + phase).sin();
        }
    }
    if noise.gaussian_sigma > 0.0 {
        let g = Normal::new(0.0, noise.gaussian_sigma)
            .map_err(|e| SynthError::Argument(e.to_string()))?;
        for v in values.iter_mut() {
            *v += g.sample(&mut rng);
        }
    }
    if noise.dc_offset != 0.0 {
        for v in values.iter_mut() {
            *v += noise.dc_offset;
        }
    }
    if noise.dropout_prob_per_s > 0.0 {
        let n_seconds = (n as f64 / fs_hz).ceil() as usize;
        for s in 0..n_seconds {
            if rng.gen::<f64>() < noise.dropout_prob_per_s {
                let lo = (s as f64 * fs_hz).round() as usize;
                let hi = (((s + 1) as f64 * fs_hz).round() as usize).min(n);
                for v in values.iter_mut().take(hi).skip(lo) {
                    *v = 0.0;
                }
            }
        }
    }

    let samples = SampleSeries::new(values, fs_hz)?;
    let truth = LabelSeries::binary(vec![kind.label(); n], fs_hz)?;
    Ok(Record::new("synth", samples, truth, SourceTag::Synthetic)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain_morph() -> MorphologyModel {
        MorphologyModel {
            systolic_width_s: 0.08,
            dicrotic_delay_s: 0.3,
            dicrotic_ratio: 0.3,
            amplitude_jitter: 0.0,
        }
    }

    /// Lag (in samples) of the autocorrelation maximum over `lags`.
    fn autocorr_peak_lag(x: &[f64], lags: std::ops::RangeInclusive<usize>) -> usize {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let mut best = (*lags.start(), f64::NEG_INFINITY);
        for lag in lags {
            let r: f64 = x
                .iter()
                .zip(x.iter().skip(lag))
                .map(|(&a, &b)| (a - mean) * (b - mean))
                .sum();
            if r > best.1 {
                best = (lag, r);
            }
        }
        best.0
    }

    #[test]
    fn constant_rr_gives_periodic_signal() {
        let rr = vec![0.8; 75];
        let rec = render_ppg(&rr, RhythmKind::Nsr, &plain_morph(), &NoiseModel::none(), 20.0, 3)
            .unwrap();
        let lag = autocorr_peak_lag(&rec.samples.values, 2..=32);
        assert!((lag as i64 - 16).abs() <= 1, "autocorrelation peak at lag {lag}");
    }

    #[test]
    fn dc_offset_shifts_mean_exactly() {
        let rr = vec![0.75; 40];
        let mut noisy = NoiseModel::none();
        noisy.dc_offset = 1000.0;
        let base = render_ppg(&rr, RhythmKind::Nsr, &plain_morph(), &NoiseModel::none(), 20.0, 9)
            .unwrap();
        let shifted =
            render_ppg(&rr, RhythmKind::Nsr, &plain_morph(), &noisy, 20.0, 9).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let diff = mean(&shifted.samples.values) - mean(&base.samples.values);
        assert!((diff - 1000.0).abs() < 1e-9, "mean shift {diff}");
    }

    #[test]
    fn sample_count_is_duration_times_rate() {
        let rr = vec![0.75; 80]; // sums to exactly 60 s
        let rec = render_ppg(&rr, RhythmKind::AFib, &plain_morph(), &NoiseModel::none(), 20.0, 0)
            .unwrap();
        assert_eq!(rec.samples.len(), 1200);
        assert_eq!(rec.truth.len(), 1200);
    }

    #[test]
    fn labels_are_constant_per_class() {
        let rr = vec![0.8; 10];
        let nsr = render_ppg(&rr, RhythmKind::Nsr, &plain_morph(), &NoiseModel::none(), 20.0, 0)
            .unwrap();
        let afib = render_ppg(&rr, RhythmKind::AFib, &plain_morph(), &NoiseModel::none(), 20.0, 0)
            .unwrap();
        assert!(nsr.truth.values.iter().all(|&v| v == 0.0));
        assert!(afib.truth.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rendering_is_deterministic() {
        let rr = vec![0.7, 0.9, 0.8, 0.75];
        let mut morph = plain_morph();
        morph.amplitude_jitter = 0.1;
        let noise = NoiseModel {
            baseline_wander_amp: 0.2,
            baseline_wander_hz: 0.25,
            gaussian_sigma: 0.05,
            dc_offset: 0.1,
            dropout_prob_per_s: 0.1,
        };
        let a = render_ppg(&rr, RhythmKind::Nsr, &morph, &noise, 20.0, 11).unwrap();
        let b = render_ppg(&rr, RhythmKind::Nsr, &morph, &noise, 20.0, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_dropout_zeroes_signal() {
        let rr = vec![0.8; 10];
        let mut noise = NoiseModel::none();
        noise.dropout_prob_per_s = 1.0;
        let rec = render_ppg(&rr, RhythmKind::Nsr, &plain_morph(), &noise, 20.0, 2).unwrap();
        assert!(rec.samples.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_rr_is_error() {
        assert!(matches!(
            render_ppg(&[], RhythmKind::Nsr, &plain_morph(), &NoiseModel::none(), 20.0, 0),
            Err(SynthError::Argument(_))
        ));
    }
}
