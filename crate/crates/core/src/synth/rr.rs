//! RR-interval generators.

use rand_distr::{Distribution, LogNormal, Normal};

use super::{RhythmKind, RhythmModel, SynthError};
use crate::rng::stream_rng;

/// Respiratory modulation frequency for NSR, Hz.
const RESP_HZ: f64 = 0.25;
/// Relative RR swing of the respiratory sinusoid at full depth.
const RESP_SWING: f64 = 0.05;
/// Intervals are floored at this fraction of the base period.
const MIN_RR_FRACTION: f64 = 0.2;

/// Generates consecutive RR intervals whose sum covers `duration_s`.
///
/// NSR intervals follow the base period `60/mean_bpm`, modulated by a
/// slow sinusoid and perturbed with Gaussian jitter of the requested
/// coefficient of variation. AFib intervals are drawn i.i.d. from a
/// log-normal matched to the model's mean rate and CV:
/// `sigma^2 = ln(1 + cv^2)`, `mu = ln(60/mean_bpm) - sigma^2/2`.
pub fn gen_rr_intervals(
    rhythm: &RhythmModel,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<f64>, SynthError> {
    rhythm.validate()?;
    if !(duration_s > 0.0) {
        return Err(SynthError::Argument(format!(
            "duration_s must be positive, got {duration_s}"
        )));
    }

    let mut rng = stream_rng(seed, "synth.rr");
    let base = 60.0 / rhythm.mean_bpm;
    let mut out = Vec::with_capacity((duration_s / base).ceil() as usize + 1);
    let mut t = 0.0;

    match rhythm.kind {
        RhythmKind::Nsr => {
            let jitter = Normal::new(0.0, rhythm.rr_variability * base)
                .map_err(|e| SynthError::Argument(e.to_string()))?;
            while t < duration_s {
                let swing = RESP_SWING
                    * rhythm.respiratory_mod_depth
                    * (2.0 * std::f64::consts::PI * RESP_HZ * t).sin();
                let rr = (base * (1.0 + swing) + jitter.sample(&mut rng))
                    .max(MIN_RR_FRACTION * base);
                out.push(rr);
                t += rr;
            }
        }
        RhythmKind::AFib => {
            let sigma2 = (1.0 + rhythm.rr_variability.powi(2)).ln();
            let mu = base.ln() - 0.5 * sigma2;
            let dist = LogNormal::new(mu, sigma2.sqrt())
                .map_err(|e| SynthError::Argument(e.to_string()))?;
            while t < duration_s {
                let rr = dist.sample(&mut rng);
                out.push(rr);
                t += rr;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cv(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        var.sqrt() / mean
    }

    #[test]
    fn degenerate_nsr_is_exact_base_period() {
        let m = RhythmModel::nsr(60.0, 0.0, 0.0).unwrap();
        let rr = gen_rr_intervals(&m, 10.0, 42).unwrap();
        assert_eq!(rr.len(), 10);
        assert!(rr.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn afib_cv_exceeds_nsr_cv() {
        let nsr = RhythmModel::nsr(75.0, 0.05, 0.5).unwrap();
        let afib = RhythmModel::afib(75.0, 0.24).unwrap();
        for seed in [0u64, 1, 99] {
            let rr_n = gen_rr_intervals(&nsr, 600.0, seed).unwrap();
            let rr_a = gen_rr_intervals(&afib, 600.0, seed).unwrap();
            assert!(rr_n.len() > 100 && rr_a.len() > 100);
            assert!(
                sample_cv(&rr_a) > sample_cv(&rr_n),
                "seed {seed}: cv(afib)={} cv(nsr)={}",
                sample_cv(&rr_a),
                sample_cv(&rr_n)
            );
        }
    }

    #[test]
    fn afib_matches_requested_mean_rate() {
        let afib = RhythmModel::afib(100.0, 0.3).unwrap();
        let rr = gen_rr_intervals(&afib, 3000.0, 7).unwrap();
        let mean = rr.iter().sum::<f64>() / rr.len() as f64;
        // ~5000 beats; standard error of the mean is ~0.25% here.
        assert!((mean - 0.6).abs() < 0.01, "mean RR {mean}");
        assert!(rr.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn same_seed_same_sequence() {
        let m = RhythmModel::afib(80.0, 0.2).unwrap();
        let a = gen_rr_intervals(&m, 120.0, 5).unwrap();
        let b = gen_rr_intervals(&m, 120.0, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coverage_reaches_duration() {
        let m = RhythmModel::nsr(55.0, 0.04, 1.0).unwrap();
        for seed in 0..5u64 {
            let rr = gen_rr_intervals(&m, 37.5, seed).unwrap();
            assert!(rr.iter().sum::<f64>() >= 37.5);
        }
    }

    #[test]
    fn non_positive_duration_is_error() {
        let m = RhythmModel::nsr(60.0, 0.0, 0.0).unwrap();
        assert!(matches!(gen_rr_intervals(&m, 0.0, 0), Err(SynthError::Argument(_))));
        assert!(matches!(gen_rr_intervals(&m, -1.0, 0), Err(SynthError::Argument(_))));
    }

    #[test]
    fn class_bounds_enforced_by_constructors() {
        assert!(RhythmModel::nsr(60.0, 0.2, 0.0).is_err());
        assert!(RhythmModel::afib(60.0, 0.05).is_err());
        assert!(RhythmModel::nsr(10.0, 0.0, 0.0).is_err());
    }
}
