//! Rhythm splicing: concatenate record segments with a linear cross-fade.

use super::SynthError;
use crate::signal::{LabelSeries, Record, SampleSeries, SourceTag};

/// Default cross-fade applied at each joint, seconds.
pub const DEFAULT_CROSS_FADE_S: f64 = 0.5;

/// Concatenates `(record, start_s, end_s)` segments into one record.
///
/// Consecutive segments overlap by `cross_fade_s`: the fade region
/// blends samples linearly, and its labels switch from the earlier to
/// the later segment at the fade midpoint. With a zero cross-fade the
/// result is plain concatenation. The output subject id is `spliced`.
pub fn splice_records(
    segments: &[(&Record, f64, f64)],
    cross_fade_s: f64,
) -> Result<Record, SynthError> {
    if segments.is_empty() {
        return Err(SynthError::Argument("splice requires at least one segment".into()));
    }
    if !(cross_fade_s >= 0.0) {
        return Err(SynthError::Argument(format!(
            "cross_fade_s must be non-negative, got {cross_fade_s}"
        )));
    }
    let fs = segments[0].0.samples.sample_rate_hz;
    for (rec, _, _) in segments {
        if rec.samples.sample_rate_hz != fs {
            return Err(SynthError::Argument(format!(
                "segment sample rates differ: {} vs {}",
                rec.samples.sample_rate_hz, fs
            )));
        }
    }

    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for (k, &(rec, start_s, end_s)) in segments.iter().enumerate() {
        let i0 = (start_s * fs).round() as i64;
        let i1 = (end_s * fs).round() as i64;
        if i0 < 0 || i1 <= i0 || i1 as usize > rec.samples.len() {
            return Err(SynthError::Argument(format!(
                "segment {k}: range [{start_s}, {end_s}] s invalid for a {:.3} s record",
                rec.duration_s()
            )));
        }
        let (i0, i1) = (i0 as usize, i1 as usize);
        let seg_vals = &rec.samples.values[i0..i1];
        let seg_labels = &rec.truth.values[i0..i1];

        if values.is_empty() {
            values.extend_from_slice(seg_vals);
            labels.extend_from_slice(seg_labels);
            continue;
        }

        let fade = ((cross_fade_s * fs).round() as usize).min(values.len()).min(seg_vals.len());
        let tail = values.len() - fade;
        for i in 0..fade {
            let w = (i + 1) as f64 / (fade + 1) as f64;
            values[tail + i] = (1.0 - w) * values[tail + i] + w * seg_vals[i];
            if i >= fade / 2 {
                labels[tail + i] = seg_labels[i];
            }
        }
        values.extend_from_slice(&seg_vals[fade..]);
        labels.extend_from_slice(&seg_labels[fade..]);
    }

    let samples = SampleSeries::new(values, fs)?;
    let truth = LabelSeries::new(labels, fs)?;
    Ok(Record::new("spliced", samples, truth, SourceTag::Synthetic)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_rr_intervals, render_ppg, MorphologyModel, NoiseModel, RhythmKind, RhythmModel};
    use proptest::prelude::*;

    fn morph() -> MorphologyModel {
        MorphologyModel {
            systolic_width_s: 0.08,
            dicrotic_delay_s: 0.3,
            dicrotic_ratio: 0.3,
            amplitude_jitter: 0.0,
        }
    }

    fn rendered(kind: RhythmKind, duration_s: f64, seed: u64) -> Record {
        let model = match kind {
            RhythmKind::Nsr => RhythmModel::nsr(70.0, 0.03, 0.4).unwrap(),
            RhythmKind::AFib => RhythmModel::afib(90.0, 0.25).unwrap(),
        };
        let rr = gen_rr_intervals(&model, duration_s, seed).unwrap();
        render_ppg(&rr, kind, &morph(), &NoiseModel::none(), 20.0, seed).unwrap()
    }

    /// (label, run length in samples) pairs.
    fn label_runs(labels: &[f64]) -> Vec<(f64, usize)> {
        let mut runs = Vec::new();
        for &v in labels {
            match runs.last_mut() {
                Some((label, n)) if *label == v => *n += 1,
                _ => runs.push((v, 1)),
            }
        }
        runs
    }

    #[test]
    fn zero_fade_lengths_add() {
        let a = rendered(RhythmKind::Nsr, 10.0, 1);
        let b = rendered(RhythmKind::AFib, 20.0, 2);
        let out = splice_records(&[(&a, 0.0, 10.0), (&b, 0.0, 20.0)], 0.0).unwrap();
        // 10 s and 20 s segments at 20 Hz concatenate exactly.
        assert_eq!(out.samples.len(), 600);
    }

    #[test]
    fn single_full_segment_is_identity() {
        let a = rendered(RhythmKind::Nsr, 12.0, 3);
        let out = splice_records(&[(&a, 0.0, a.duration_s())], 0.5).unwrap();
        assert_eq!(out.samples.values, a.samples.values);
        assert_eq!(out.truth.values, a.truth.values);
        assert_eq!(out.subject_id, "spliced");
    }

    #[test]
    fn nsr_afib_nsr_yields_one_positive_run() {
        let nsr1 = rendered(RhythmKind::Nsr, 300.0, 4);
        let afib = rendered(RhythmKind::AFib, 60.0, 5);
        let nsr2 = rendered(RhythmKind::Nsr, 300.0, 6);
        let out = splice_records(
            &[
                (&nsr1, 0.0, 300.0),
                (&afib, 0.0, 60.0),
                (&nsr2, 0.0, 300.0),
            ],
            DEFAULT_CROSS_FADE_S,
        )
        .unwrap();
        let runs = label_runs(&out.truth.values);
        let positive: Vec<_> = runs.iter().filter(|(v, _)| *v == 1.0).collect();
        assert_eq!(positive.len(), 1, "runs: {runs:?}");
        // One positive run of 60 s, within one cross-fade of nominal.
        let len_s = positive[0].1 as f64 / 20.0;
        assert!((len_s - 60.0).abs() <= DEFAULT_CROSS_FADE_S, "positive run {len_s} s");
    }

    #[test]
    fn mismatched_rates_are_rejected() {
        let a = rendered(RhythmKind::Nsr, 5.0, 7);
        let rr = gen_rr_intervals(&RhythmModel::nsr(70.0, 0.0, 0.0).unwrap(), 5.0, 8).unwrap();
        let b = render_ppg(&rr, RhythmKind::Nsr, &morph(), &NoiseModel::none(), 25.0, 8).unwrap();
        assert!(matches!(
            splice_records(&[(&a, 0.0, 5.0), (&b, 0.0, 5.0)], 0.0),
            Err(SynthError::Argument(_))
        ));
    }

    #[test]
    fn out_of_range_segment_is_rejected() {
        let a = rendered(RhythmKind::Nsr, 5.0, 9);
        assert!(matches!(
            splice_records(&[(&a, 0.0, 50.0)], 0.0),
            Err(SynthError::Argument(_))
        ));
    }

    proptest! {
        // Zero-fade splice length is additive regardless of grouping.
        #[test]
        fn zero_fade_length_is_associative(
            d1 in 2.0f64..6.0,
            d2 in 2.0f64..6.0,
            d3 in 2.0f64..6.0,
        ) {
            let a = rendered(RhythmKind::Nsr, d1, 10);
            let b = rendered(RhythmKind::AFib, d2, 11);
            let c = rendered(RhythmKind::Nsr, d3, 12);
            let da = a.duration_s();
            let db = b.duration_s();
            let dc = c.duration_s();

            let abc = splice_records(
                &[(&a, 0.0, da), (&b, 0.0, db), (&c, 0.0, dc)], 0.0).unwrap();
            let ab = splice_records(&[(&a, 0.0, da), (&b, 0.0, db)], 0.0).unwrap();
            let ab_c = splice_records(
                &[(&ab, 0.0, ab.duration_s()), (&c, 0.0, dc)], 0.0).unwrap();
            prop_assert_eq!(abc.samples.len(), ab_c.samples.len());
            prop_assert_eq!(
                abc.samples.len(),
                a.samples.len() + b.samples.len() + c.samples.len()
            );
        }
    }
}
