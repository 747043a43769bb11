//! Threshold operating points, Brier score and calibration bins.

use super::{check_pairs, MetricsError};

/// Confusion counts and derived rates at one threshold, prediction
/// positive iff `p >= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

pub fn operating_point(
    probs: &[f64],
    labels: &[f64],
    threshold: f64,
) -> Result<OperatingPoint, MetricsError> {
    check_pairs(probs, labels)?;
    if !threshold.is_finite() {
        return Err(MetricsError::Argument(format!("threshold must be finite, got {threshold}")));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fned = 0usize;
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fned += 1,
        }
    }
    if tp + fned == 0 || tn + fp == 0 {
        return Err(MetricsError::Undefined(format!(
            "operating point needs both classes, got {} positives and {} negatives",
            tp + fned,
            tn + fp
        )));
    }
    let sensitivity = tp as f64 / (tp + fned) as f64;
    let specificity = tn as f64 / (tn + fp) as f64;
    Ok(OperatingPoint {
        threshold,
        sensitivity,
        specificity,
        fpr: 1.0 - specificity,
        fnr: 1.0 - sensitivity,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fned,
    })
}

/// Mean squared error of the probabilities: `mean((p_j - y_j)^2)`.
pub fn brier(probs: &[f64], labels: &[f64]) -> Result<f64, MetricsError> {
    check_pairs(probs, labels)?;
    let sum: f64 = probs.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(sum / probs.len() as f64)
}

/// One equal-width calibration bin; `mean_prob` and `empirical_rate`
/// are NaN when the bin is empty (`count == 0`).
#[derive(Debug, Clone)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_prob: f64,
    pub empirical_rate: f64,
}

/// Equal-width bins over [0,1]; the last bin is closed above so
/// `p = 1` lands in it.
pub fn reliability_bins(
    probs: &[f64],
    labels: &[f64],
    n_bins: usize,
) -> Result<Vec<ReliabilityBin>, MetricsError> {
    check_pairs(probs, labels)?;
    if n_bins == 0 {
        return Err(MetricsError::Argument("n_bins must be >= 1".into()));
    }
    let mut count = vec![0usize; n_bins];
    let mut p_sum = vec![0.0; n_bins];
    let mut y_sum = vec![0.0; n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        let b = ((p * n_bins as f64) as usize).min(n_bins - 1);
        count[b] += 1;
        p_sum[b] += p;
        y_sum[b] += y;
    }
    Ok((0..n_bins)
        .map(|b| {
            let n = count[b] as f64;
            ReliabilityBin {
                lo: b as f64 / n_bins as f64,
                hi: (b + 1) as f64 / n_bins as f64,
                count: count[b],
                mean_prob: p_sum[b] / n,
                empirical_rate: y_sum[b] / n,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn clean_separation_at_half() {
        let op = operating_point(&[0.6, 0.4], &[1.0, 0.0], 0.5).unwrap();
        assert_eq!(op.sensitivity, 1.0);
        assert_eq!(op.specificity, 1.0);
        assert_eq!((op.fpr, op.fnr), (0.0, 0.0));
        assert_eq!(op.true_positives, 1);
        assert_eq!(op.true_negatives, 1);
    }

    #[test]
    fn extreme_thresholds() {
        let probs = [0.2, 0.8, 0.5, 0.6];
        let labels = [0.0, 1.0, 1.0, 0.0];
        // Everything predicted positive.
        let op = operating_point(&probs, &labels, 0.0).unwrap();
        assert_eq!((op.sensitivity, op.specificity), (1.0, 0.0));
        // Nothing predicted positive.
        let op = operating_point(&probs, &labels, 1.0 + 1e-9).unwrap();
        assert_eq!((op.sensitivity, op.specificity), (0.0, 1.0));
    }

    #[test]
    fn threshold_is_inclusive() {
        let op = operating_point(&[0.5, 0.5], &[1.0, 0.0], 0.5).unwrap();
        assert_eq!(op.sensitivity, 1.0);
        assert_eq!(op.specificity, 0.0);
    }

    #[test]
    fn counts_partition_the_input() {
        let mut rng = stream_rng(4, "test.points");
        let probs: Vec<f64> = (0..300).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let labels: Vec<f64> = (0..300).map(|_| f64::from(rng.gen_bool(0.3))).collect();
        for t in [0.1, 0.5, 0.9] {
            let op = operating_point(&probs, &labels, t).unwrap();
            let total = op.true_positives
                + op.false_positives
                + op.true_negatives
                + op.false_negatives;
            assert_eq!(total, 300);
            assert!((op.fpr - (1.0 - op.specificity)).abs() < 1e-15);
            assert!((op.fnr - (1.0 - op.sensitivity)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_class_operating_point_is_undefined() {
        assert!(matches!(
            operating_point(&[0.2, 0.8], &[0.0, 0.0], 0.5),
            Err(MetricsError::Undefined(_))
        ));
    }

    #[test]
    fn brier_basics() {
        assert_eq!(brier(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(brier(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.25);
        let b = brier(&[0.8, 0.4], &[1.0, 0.0]).unwrap();
        assert!((b - 0.10).abs() < 1e-15);
    }

    #[test]
    fn brier_invariant_under_relabeling() {
        let mut rng = stream_rng(5, "test.points");
        let probs: Vec<f64> = (0..120).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let labels: Vec<f64> = (0..120).map(|_| f64::from(rng.gen_bool(0.5))).collect();
        let direct = brier(&probs, &labels).unwrap();
        let flipped_p: Vec<f64> = probs.iter().map(|p| 1.0 - p).collect();
        let flipped_y: Vec<f64> = labels.iter().map(|y| 1.0 - y).collect();
        let flipped = brier(&flipped_p, &flipped_y).unwrap();
        assert!((direct - flipped).abs() < 1e-15);
    }

    #[test]
    fn half_probability_bin_sees_half_rate() {
        let probs = vec![0.5; 40];
        let labels: Vec<f64> = (0..40).map(|i| (i % 2) as f64).collect();
        let bins = reliability_bins(&probs, &labels, 10).unwrap();
        let bin = &bins[5];
        assert_eq!(bin.count, 40);
        assert!((bin.mean_prob - 0.5).abs() < 1e-15);
        assert!((bin.empirical_rate - 0.5).abs() < 1e-15);
        // Everything else is empty and flagged as such.
        for (i, b) in bins.iter().enumerate() {
            if i != 5 {
                assert_eq!(b.count, 0);
                assert!(b.mean_prob.is_nan());
            }
        }
    }

    #[test]
    fn single_bin_is_global_means() {
        let probs = [0.2, 0.4, 0.9];
        let labels = [0.0, 1.0, 1.0];
        let bins = reliability_bins(&probs, &labels, 1).unwrap();
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].count, 3);
        assert!((bins[0].mean_prob - 0.5).abs() < 1e-15);
        assert!((bins[0].empirical_rate - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn calibrated_draws_stay_near_the_diagonal() {
        let mut rng = stream_rng(6, "test.points");
        let n = 100_000;
        let mut probs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let p: f64 = rng.gen_range(0.0..=1.0);
            probs.push(p);
            labels.push(f64::from(rng.gen_bool(p)));
        }
        let bins = reliability_bins(&probs, &labels, 10).unwrap();
        for b in &bins {
            if b.count >= 1000 {
                assert!(
                    (b.mean_prob - b.empirical_rate).abs() <= 0.02,
                    "bin [{}, {}): prob {} rate {}",
                    b.lo,
                    b.hi,
                    b.mean_prob,
                    b.empirical_rate
                );
            }
        }
    }

    #[test]
    fn boundary_probabilities_fall_in_end_bins() {
        let bins = reliability_bins(&[0.0, 1.0], &[0.0, 1.0], 4).unwrap();
        assert_eq!(bins[0].count, 1);
        assert_eq!(bins[3].count, 1);
        assert!(reliability_bins(&[0.5], &[1.0], 0).is_err());
    }
}
