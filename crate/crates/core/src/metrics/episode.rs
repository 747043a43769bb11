//! Minimum detectable episode length, probed on synthetic records.

use rand::Rng;

use super::MetricsError;
use crate::nn::{StreamState, WeightStore};
use crate::rng::stream_rng;
use crate::synth::{
    gen_rr_intervals, render_ppg, splice_records, GeneratorConfig, MorphologyModel, NoiseModel,
    RhythmKind, RhythmModel,
};

/// NSR padding rendered on each side of the probed episode, seconds.
/// Long enough for streaming state to settle well before onset.
pub const EPISODE_PAD_S: f64 = 60.0;

/// Grace period after the labelled episode end during which outputs
/// still count as in-episode. Each output summarises a trailing input
/// window, so the response to a short episode can land just past it.
pub const EPISODE_TOLERANCE_S: f64 = 2.0;

/// Result of one probe duration.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub duration_s: f64,
    pub detected: bool,
    /// Onset to first at-or-above-threshold output; None if undetected.
    pub detection_delay_s: Option<f64>,
}

/// Detection sweep over ascending episode durations.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    pub outcomes: Vec<EpisodeOutcome>,
    /// Shortest duration from which this and every longer probe was
    /// detected; None when the longest probe was missed.
    pub min_detectable_s: Option<f64>,
    /// True when detection never regresses as durations grow.
    pub monotone: bool,
}

impl EpisodeReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("duration_s,detected,delay_s\n");
        for o in &self.outcomes {
            let delay = o.detection_delay_s.map(|d| d.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", o.duration_s, o.detected, delay));
        }
        out
    }
}

/// Probes how short an AFib episode the model still catches.
///
/// For each duration `d > 0` one record is built as NSR pad, `d`
/// seconds of AFib, NSR pad, spliced with the config cross-fade, and
/// run through streaming inference. The episode counts as detected
/// when any output inside `[onset, end + EPISODE_TOLERANCE_S]` is at
/// or above `threshold`; onset and end are read from the spliced truth
/// labels. A zero duration has no episode and is never detected.
///
/// Subject-level parameters are drawn once from the config ranges, so
/// all probes share rhythm, morphology and noise models and differ
/// only in episode length and realisation seeds.
pub fn min_detectable_episode(
    model: &WeightStore<f64>,
    config: &GeneratorConfig,
    durations: &[f64],
    threshold: f64,
    seed: u64,
) -> Result<EpisodeReport, MetricsError> {
    config.validate()?;
    if durations.is_empty() {
        return Err(MetricsError::Argument("durations must be non-empty".into()));
    }
    for pair in durations.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(MetricsError::Argument(format!(
                "durations must be strictly ascending, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if !durations.iter().all(|d| d.is_finite() && *d >= 0.0) {
        return Err(MetricsError::Argument(format!(
            "durations must be finite and non-negative, got {durations:?}"
        )));
    }
    if !threshold.is_finite() {
        return Err(MetricsError::Argument(format!("threshold must be finite, got {threshold}")));
    }

    let mut rng = stream_rng(seed, "metrics.episode");
    let nsr = RhythmModel::nsr(
        config.nsr_bpm.sample(&mut rng),
        config.nsr_cv.sample(&mut rng),
        config.nsr_resp_depth.sample(&mut rng),
    )?;
    let afib =
        RhythmModel::afib(config.afib_bpm.sample(&mut rng), config.afib_cv.sample(&mut rng))?;
    let morph = MorphologyModel {
        systolic_width_s: config.systolic_width_s.sample(&mut rng),
        dicrotic_delay_s: config.dicrotic_delay_s.sample(&mut rng),
        dicrotic_ratio: config.dicrotic_ratio.sample(&mut rng),
        amplitude_jitter: config.amplitude_jitter.sample(&mut rng),
    };
    let noise = NoiseModel {
        baseline_wander_amp: config.baseline_wander_amp.sample(&mut rng),
        baseline_wander_hz: config.baseline_wander_hz.sample(&mut rng),
        gaussian_sigma: config.gaussian_sigma.sample(&mut rng),
        dc_offset: config.dc_offset.sample(&mut rng),
        dropout_prob_per_s: config.dropout_prob_per_s.sample(&mut rng),
    };

    let fs = config.fs_hz;
    let ratio = model.spec.total_pool() as f64;
    let mut state = StreamState::new(model)?;
    let mut outcomes = Vec::with_capacity(durations.len());
    for &d in durations {
        // Consumed whether or not the probe renders anything, so every
        // probe's seeds depend only on its position in the sweep.
        let seeds: [u64; 6] = rng.gen();
        if d == 0.0 {
            outcomes.push(EpisodeOutcome { duration_s: d, detected: false, detection_delay_s: None });
            continue;
        }

        let pad1_rr = gen_rr_intervals(&nsr, EPISODE_PAD_S, seeds[0])?;
        let pad1 = render_ppg(&pad1_rr, RhythmKind::Nsr, &morph, &noise, fs, seeds[1])?;
        let ep_rr = gen_rr_intervals(&afib, d, seeds[2])?;
        let episode = render_ppg(&ep_rr, RhythmKind::AFib, &morph, &noise, fs, seeds[3])?;
        let pad2_rr = gen_rr_intervals(&nsr, EPISODE_PAD_S, seeds[4])?;
        let pad2 = render_ppg(&pad2_rr, RhythmKind::Nsr, &morph, &noise, fs, seeds[5])?;
        let record = splice_records(
            &[(&pad1, 0.0, EPISODE_PAD_S), (&episode, 0.0, d), (&pad2, 0.0, EPISODE_PAD_S)],
            config.cross_fade_s,
        )?;

        let truth = &record.truth.values;
        let Some(first) = truth.iter().position(|&v| v == 1.0) else {
            // The cross-fade swallowed the whole episode.
            outcomes.push(EpisodeOutcome { duration_s: d, detected: false, detection_delay_s: None });
            continue;
        };
        let last = truth.iter().rposition(|&v| v == 1.0).unwrap();
        let onset_s = first as f64 / record.truth.rate_hz;
        let end_s = (last + 1) as f64 / record.truth.rate_hz;

        state.reset();
        let probs = state.push(model, &record.samples.values)?;
        let mut delay = None;
        for (j, &p) in probs.iter().enumerate() {
            let t = (ratio * (j + 1) as f64 - 1.0) / fs;
            if t >= onset_s && t <= end_s + EPISODE_TOLERANCE_S && p >= threshold {
                delay = Some(t - onset_s);
                break;
            }
        }
        outcomes.push(EpisodeOutcome {
            duration_s: d,
            detected: delay.is_some(),
            detection_delay_s: delay,
        });
    }

    let mut min_detectable_s = None;
    for o in outcomes.iter().rev() {
        if o.detected {
            min_detectable_s = Some(o.duration_s);
        } else {
            break;
        }
    }
    let monotone = outcomes.windows(2).all(|w| w[0].detected <= w[1].detected);
    Ok(EpisodeReport { outcomes, min_detectable_s, monotone })
}
