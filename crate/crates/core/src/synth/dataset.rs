//! Whole-dataset generation with per-subject parameter draws.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    gen_rr_intervals, render_ppg, splice_records, GeneratorConfig, MorphologyModel, NoiseModel,
    RhythmKind, RhythmModel, SynthError,
};
use crate::rng::stream_rng;
use crate::signal::{Dataset, Record};

#[derive(Clone, Copy)]
enum RecordKind {
    Nsr,
    AFib,
    Spliced,
}

/// Generates `n_subjects` subjects of labelled records.
///
/// Morphology, noise and rhythm parameters are drawn once per subject
/// and shared by all of that subject's records. Record kinds follow a
/// shuffled deck with exact counts: the spliced share comes from
/// `spliced_fraction`, and the pure-AFib count is chosen so the overall
/// positive-label fraction lands on `afib_fraction` (each spliced
/// record contributes half its duration as positive labels). An
/// `afib_fraction` of zero forces an all-NSR dataset.
pub fn gen_dataset(
    config: &GeneratorConfig,
    n_subjects: usize,
    seed: u64,
) -> Result<Dataset, SynthError> {
    config.validate()?;
    if n_subjects == 0 {
        return Err(SynthError::Argument("n_subjects must be >= 1".into()));
    }

    let mut rng = stream_rng(seed, "synth.dataset");
    let n_total = n_subjects * config.records_per_subject;

    let n_spliced = if config.afib_fraction == 0.0 {
        0
    } else {
        ((config.spliced_fraction * n_total as f64).round() as usize).min(n_total)
    };
    let n_afib = ((config.afib_fraction * n_total as f64 - 0.5 * n_spliced as f64).round())
        .max(0.0) as usize;
    let n_afib = n_afib.min(n_total - n_spliced);

    let mut deck: Vec<RecordKind> = Vec::with_capacity(n_total);
    deck.resize(n_spliced, RecordKind::Spliced);
    deck.resize(n_spliced + n_afib, RecordKind::AFib);
    deck.resize(n_total, RecordKind::Nsr);
    deck.shuffle(&mut rng);

    let mut records: Vec<Record> = Vec::with_capacity(n_total);
    for subject in 0..n_subjects {
        let subject_id = format!("s{subject:03}");

        // Fixed per-subject parameter draws, in declaration order.
        let nsr = RhythmModel {
            kind: RhythmKind::Nsr,
            mean_bpm: config.nsr_bpm.sample(&mut rng),
            rr_variability: config.nsr_cv.sample(&mut rng),
            respiratory_mod_depth: config.nsr_resp_depth.sample(&mut rng),
        };
        let afib = RhythmModel {
            kind: RhythmKind::AFib,
            mean_bpm: config.afib_bpm.sample(&mut rng),
            rr_variability: config.afib_cv.sample(&mut rng),
            respiratory_mod_depth: 0.0,
        };
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
        nsr.validate()?;
        afib.validate()?;

        for r in 0..config.records_per_subject {
            let kind = deck[subject * config.records_per_subject + r];
            let mut record = match kind {
                RecordKind::Nsr => {
                    let rr = gen_rr_intervals(&nsr, config.record_duration_s, rng.gen())?;
                    render_ppg(&rr, RhythmKind::Nsr, &morph, &noise, config.fs_hz, rng.gen())?
                }
                RecordKind::AFib => {
                    let rr = gen_rr_intervals(&afib, config.record_duration_s, rng.gen())?;
                    render_ppg(&rr, RhythmKind::AFib, &morph, &noise, config.fs_hz, rng.gen())?
                }
                RecordKind::Spliced => {
                    let quarter = config.record_duration_s / 4.0;
                    let rr_a = gen_rr_intervals(&nsr, quarter, rng.gen())?;
                    let rr_b = gen_rr_intervals(&afib, 2.0 * quarter, rng.gen())?;
                    let rr_c = gen_rr_intervals(&nsr, quarter, rng.gen())?;
                    let a = render_ppg(&rr_a, RhythmKind::Nsr, &morph, &noise, config.fs_hz, rng.gen())?;
                    let b = render_ppg(&rr_b, RhythmKind::AFib, &morph, &noise, config.fs_hz, rng.gen())?;
                    let c = render_ppg(&rr_c, RhythmKind::Nsr, &morph, &noise, config.fs_hz, rng.gen())?;
                    splice_records(
                        &[
                            (&a, 0.0, a.duration_s()),
                            (&b, 0.0, b.duration_s()),
                            (&c, 0.0, c.duration_s()),
                        ],
                        config.cross_fade_s,
                    )?
                }
            };
            record.subject_id = subject_id.clone();
            records.push(record);
        }
    }

    Ok(Dataset::unsplit(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn quick_config() -> GeneratorConfig {
        GeneratorConfig {
            record_duration_s: 40.0,
            ..GeneratorConfig::default()
        }
    }

    fn positive_fraction(ds: &Dataset) -> f64 {
        let (mut pos, mut total) = (0usize, 0usize);
        for (rec, _) in &ds.records {
            pos += rec.truth.values.iter().filter(|&&v| v == 1.0).count();
            total += rec.truth.len();
        }
        pos as f64 / total as f64
    }

    #[test]
    fn subjects_are_distinct() {
        let ds = gen_dataset(&quick_config(), 20, 1).unwrap();
        let ids: BTreeSet<_> = ds.records.iter().map(|(r, _)| r.subject_id.clone()).collect();
        assert_eq!(ids.len(), 20);
        assert_eq!(ds.records.len(), 40);
    }

    #[test]
    fn zero_afib_fraction_means_all_negative() {
        let cfg = GeneratorConfig { afib_fraction: 0.0, ..quick_config() };
        let ds = gen_dataset(&cfg, 6, 2).unwrap();
        for (rec, _) in &ds.records {
            assert!(rec.truth.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn positive_fraction_tracks_config() {
        let cfg = quick_config();
        let ds = gen_dataset(&cfg, 20, 3).unwrap();
        let frac = positive_fraction(&ds);
        assert!(
            (frac - cfg.afib_fraction).abs() <= 0.05,
            "positive fraction {frac} vs target {}",
            cfg.afib_fraction
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = quick_config();
        let a = gen_dataset(&cfg, 4, 9).unwrap();
        let b = gen_dataset(&cfg, 4, 9).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for ((ra, _), (rb, _)) in a.records.iter().zip(b.records.iter()) {
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn every_record_is_internally_consistent() {
        let ds = gen_dataset(&quick_config(), 5, 4).unwrap();
        for (rec, _) in &ds.records {
            assert_eq!(rec.truth.len(), rec.samples.len());
            assert!(rec.samples.values.iter().all(|v| v.is_finite()));
            assert!(rec.truth.is_binary());
        }
    }

    #[test]
    fn zero_subjects_is_error() {
        assert!(matches!(
            gen_dataset(&quick_config(), 0, 0),
            Err(SynthError::Argument(_))
        ));
    }
}
