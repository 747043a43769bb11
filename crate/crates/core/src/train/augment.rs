//! Example extraction and on-the-fly augmentation.
//!
//! Training examples are fixed-length subsequences of records. The
//! base plan tiles each record with non-overlapping windows; cropping
//! re-draws each window's offset uniformly within its source record,
//! so successive epochs see different phases of the same data.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{AugmentConfig, TrainError};
use crate::signal::{downsample_labels, LabelSeries, Record};

/// A window into a source record: `record` indexes the caller's slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExampleRef {
    pub record: usize,
    pub offset: usize,
}

/// One training example: input samples plus targets at the output
/// rate (one per `label_ratio` input samples).
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

fn check_example_len(example_len: usize, label_ratio: usize) -> Result<(), TrainError> {
    if label_ratio == 0 || example_len == 0 || !example_len.is_multiple_of(label_ratio) {
        return Err(TrainError::Argument(format!(
            "example length {example_len} must be a positive multiple of {label_ratio}"
        )));
    }
    Ok(())
}

/// Tile each record with non-overlapping windows of `example_len`
/// samples. Records shorter than one window are skipped; the count of
/// skipped records is returned alongside the plan.
pub fn plan_examples(
    records: &[&Record],
    example_len: usize,
    label_ratio: usize,
) -> Result<(Vec<ExampleRef>, usize), TrainError> {
    check_example_len(example_len, label_ratio)?;
    let mut refs = Vec::new();
    let mut skipped = 0usize;
    for (r, record) in records.iter().enumerate() {
        let n = record.samples.values.len();
        if n < example_len {
            skipped += 1;
            continue;
        }
        for k in 0..n / example_len {
            refs.push(ExampleRef { record: r, offset: k * example_len });
        }
    }
    Ok((refs, skipped))
}

fn extract(
    record: &Record,
    offset: usize,
    example_len: usize,
    label_ratio: usize,
) -> Result<Example, TrainError> {
    let n = record.samples.values.len();
    if offset.checked_add(example_len).is_none_or(|end| end > n) {
        return Err(TrainError::Argument(format!(
            "window [{offset}, {offset}+{example_len}) exceeds record of {n} samples"
        )));
    }
    let x = record.samples.values[offset..offset + example_len].to_vec();
    let window = LabelSeries::new(
        record.truth.values[offset..offset + example_len].to_vec(),
        record.truth.rate_hz,
    )?;
    let y = downsample_labels(&window, label_ratio)?.values;
    Ok(Example { x, y })
}

/// Unaugmented non-overlapping examples, for validation and
/// evaluation.
pub fn validation_examples(
    records: &[&Record],
    example_len: usize,
    label_ratio: usize,
) -> Result<Vec<Example>, TrainError> {
    let (refs, _) = plan_examples(records, example_len, label_ratio)?;
    refs.iter()
        .map(|r| extract(records[r.record], r.offset, example_len, label_ratio))
        .collect()
}

/// Materialize one batch of augmented examples.
///
/// Per example, in draw order: crop offset (when enabled), amplitude
/// scale, DC shift, noise sigma, then one Gaussian noise sample per
/// input sample. The transform is `s * x + c + noise`; targets come
/// from the cropped window and are never transformed. With
/// `per_example = false` a single scale/shift/sigma draw covers the
/// whole batch (crop offsets stay per example).
pub fn augment_batch(
    refs: &[ExampleRef],
    records: &[&Record],
    example_len: usize,
    label_ratio: usize,
    aug: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<Vec<Example>, TrainError> {
    check_example_len(example_len, label_ratio)?;
    aug.validate()?;
    let batch_draw = if aug.per_example {
        None
    } else {
        Some(draw_transform(aug, rng))
    };
    let mut out = Vec::with_capacity(refs.len());
    for r in refs {
        let record = records.get(r.record).ok_or_else(|| {
            TrainError::Argument(format!("example references record {} of {}", r.record, records.len()))
        })?;
        let offset = if aug.crop {
            let n = record.samples.values.len();
            if n < example_len {
                return Err(TrainError::Argument(format!(
                    "record {} has {n} samples, shorter than one example of {example_len}",
                    record.subject_id
                )));
            }
            rng.gen_range(0..=n - example_len)
        } else {
            r.offset
        };
        let (scale, shift, sigma) = batch_draw.unwrap_or_else(|| draw_transform(aug, rng));
        let noise = Normal::new(0.0, sigma).map_err(|e| {
            TrainError::Argument(format!("noise sigma {sigma}: {e}"))
        })?;
        let mut ex = extract(record, offset, example_len, label_ratio)?;
        for v in &mut ex.x {
            *v = scale * *v + shift + noise.sample(rng);
        }
        out.push(ex);
    }
    Ok(out)
}

fn draw_transform(aug: &AugmentConfig, rng: &mut impl Rng) -> (f64, f64, f64) {
    let scale = rng.gen_range(aug.scale_range.0..=aug.scale_range.1);
    let shift = rng.gen_range(aug.shift_range.0..=aug.shift_range.1);
    let sigma = rng.gen_range(aug.noise_sigma_range.0..=aug.noise_sigma_range.1);
    (scale, shift, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::signal::{SampleSeries, SourceTag};

    fn record_with(values: Vec<f64>, labels: Vec<u8>) -> Record {
        let samples = SampleSeries::new(values, 20.0).unwrap();
        let truth = LabelSeries::binary(labels, 20.0).unwrap();
        Record::new("t00", samples, truth, SourceTag::Synthetic).unwrap()
    }

    fn ramp_record(n: usize) -> Record {
        record_with((0..n).map(|i| i as f64).collect(), vec![0; n])
    }

    #[test]
    fn plan_tiles_records_and_skips_short_ones() {
        let long = ramp_record(200);
        let short = ramp_record(63);
        let records = [&long, &short];
        let (refs, skipped) = plan_examples(&records, 64, 16).unwrap();
        assert_eq!(skipped, 1);
        assert_eq!(
            refs,
            vec![
                ExampleRef { record: 0, offset: 0 },
                ExampleRef { record: 0, offset: 64 },
                ExampleRef { record: 0, offset: 128 },
            ]
        );
    }

    #[test]
    fn identity_augmentation_matches_validation_windows() {
        let record = ramp_record(192);
        let records = [&record];
        let (refs, _) = plan_examples(&records, 64, 16).unwrap();
        let mut rng = stream_rng(1, "test.augment");
        let augmented =
            augment_batch(&refs, &records, 64, 16, &AugmentConfig::none(), &mut rng).unwrap();
        let plain = validation_examples(&records, 64, 16).unwrap();
        assert_eq!(augmented, plain);
    }

    #[test]
    fn shift_moves_samples_and_leaves_targets() {
        let mut labels = vec![0u8; 64];
        labels.extend(vec![1u8; 64]);
        let record = record_with(vec![2.0; 128], labels);
        let records = [&record];
        let aug = AugmentConfig {
            crop: false,
            scale_range: (1.0, 1.0),
            shift_range: (5.0, 5.0),
            noise_sigma_range: (0.0, 0.0),
            per_example: true,
        };
        let refs = [
            ExampleRef { record: 0, offset: 0 },
            ExampleRef { record: 0, offset: 64 },
        ];
        let mut rng = stream_rng(2, "test.augment");
        let out = augment_batch(&refs, &records, 64, 16, &aug, &mut rng).unwrap();
        assert!(out[0].x.iter().all(|&v| (v - 7.0).abs() < 1e-12));
        assert_eq!(out[0].y, vec![0.0; 4]);
        assert_eq!(out[1].y, vec![1.0; 4]);
    }

    #[test]
    fn scale_multiplies_samples() {
        let record = ramp_record(64);
        let records = [&record];
        let aug = AugmentConfig {
            crop: false,
            scale_range: (0.25, 0.25),
            shift_range: (0.0, 0.0),
            noise_sigma_range: (0.0, 0.0),
            per_example: true,
        };
        let refs = [ExampleRef { record: 0, offset: 0 }];
        let mut rng = stream_rng(3, "test.augment");
        let out = augment_batch(&refs, &records, 64, 16, &aug, &mut rng).unwrap();
        for (i, &v) in out[0].x.iter().enumerate() {
            assert!((v - 0.25 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_has_requested_spread() {
        let n = 100_000;
        let record = record_with(vec![0.0; n], vec![0; n]);
        let records = [&record];
        let aug = AugmentConfig {
            crop: false,
            scale_range: (1.0, 1.0),
            shift_range: (0.0, 0.0),
            noise_sigma_range: (0.1, 0.1),
            per_example: true,
        };
        let refs = [ExampleRef { record: 0, offset: 0 }];
        let mut rng = stream_rng(4, "test.augment");
        let out = augment_batch(&refs, &records, n, 16, &aug, &mut rng).unwrap();
        let mean = out[0].x.iter().sum::<f64>() / n as f64;
        let var = out[0].x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.005, "std {}", var.sqrt());
        assert!(mean.abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn crop_offsets_stay_in_bounds_and_are_deterministic() {
        let record = ramp_record(250);
        let records = [&record];
        let aug = AugmentConfig {
            crop: true,
            scale_range: (1.0, 1.0),
            shift_range: (0.0, 0.0),
            noise_sigma_range: (0.0, 0.0),
            per_example: true,
        };
        let refs = vec![ExampleRef { record: 0, offset: 0 }; 40];
        let run = |seed| {
            let mut rng = stream_rng(seed, "test.augment");
            augment_batch(&refs, &records, 64, 16, &aug, &mut rng).unwrap()
        };
        let a = run(7);
        // The ramp makes the first sample equal to the offset.
        let offsets: Vec<f64> = a.iter().map(|e| e.x[0]).collect();
        assert!(offsets.iter().all(|&o| (0.0..=186.0).contains(&o)));
        assert!(offsets.windows(2).any(|w| w[0] != w[1]), "crop never varied");
        assert_eq!(a, run(7));
        assert_ne!(a, run(8));
    }

    #[test]
    fn batch_level_draws_share_the_transform() {
        let record = record_with(vec![1.0; 128], vec![0; 128]);
        let records = [&record];
        let aug = AugmentConfig {
            crop: false,
            scale_range: (0.5, 1.5),
            shift_range: (-0.5, 0.5),
            noise_sigma_range: (0.0, 0.0),
            per_example: false,
        };
        let refs = [
            ExampleRef { record: 0, offset: 0 },
            ExampleRef { record: 0, offset: 64 },
        ];
        let mut rng = stream_rng(5, "test.augment");
        let out = augment_batch(&refs, &records, 64, 16, &aug, &mut rng).unwrap();
        assert_eq!(out[0].x, out[1].x);

        let per_example = AugmentConfig { per_example: true, ..aug };
        let mut rng = stream_rng(5, "test.augment");
        let out = augment_batch(&refs, &records, 64, 16, &per_example, &mut rng).unwrap();
        assert_ne!(out[0].x, out[1].x);
    }

    #[test]
    fn rejects_bad_geometry() {
        let record = ramp_record(64);
        let records = [&record];
        let mut rng = stream_rng(6, "test.augment");
        // Window length not a multiple of the label ratio.
        assert!(plan_examples(&records, 60, 16).is_err());
        // Reference past the end of the record.
        let refs = [ExampleRef { record: 0, offset: 32 }];
        assert!(augment_batch(&refs, &records, 64, 16, &AugmentConfig::none(), &mut rng).is_err());
        // Reference to a missing record.
        let refs = [ExampleRef { record: 3, offset: 0 }];
        assert!(augment_batch(&refs, &records, 64, 16, &AugmentConfig::none(), &mut rng).is_err());
    }
}
