//! The training loop: epochs over shuffled augmented examples, Adam
//! updates, running-statistics maintenance, plateau annealing and a
//! per-epoch history.

use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamState};
use super::augment::{augment_batch, plan_examples, validation_examples};
use super::backprop::{backward, BatchStats, Realization};
use super::loss::{auto_class_weights, weighted_bce, BCE_CLAMP_EPS};
use super::scheduler::PlateauScheduler;
use super::{AugmentConfig, ClassWeights, TrainConfig, TrainError, BN_MOMENTUM};
use crate::nn::{forward_values, WeightStore};
use crate::rng::stream_rng;
use crate::signal::{downsample_labels, Record};

/// One history row. Losses are class-weighted BCE normalized to
/// mean-per-output; `lr` is the rate in effect during the epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Weights after the last completed epoch.
    pub weights: WeightStore<f64>,
    /// Weights at the lowest validation loss seen.
    pub best_weights: WeightStore<f64>,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
    /// The `(w0, w1)` actually applied.
    pub class_weights: (f64, f64),
    /// Training records shorter than one example, left out.
    pub skipped_records: usize,
    /// Diagnostic when the run stopped on a non-finite loss; weights
    /// roll back to the end of the last finite epoch.
    pub aborted: Option<String>,
}

/// `fit` with a per-epoch observer, called after each completed epoch
/// with the stats row and the current weights (for checkpointing).
pub fn fit_observed(
    weights: WeightStore<f64>,
    train: &[&Record],
    validation: &[&Record],
    cfg: &TrainConfig,
    aug: &AugmentConfig,
    observer: &mut dyn FnMut(&EpochStats, &WeightStore<f64>),
) -> Result<FitResult, TrainError> {
    let mut weights = weights;
    weights.validate()?;
    let spec = weights.spec.clone();
    let ratio = spec.total_pool();
    cfg.validate(ratio)?;
    aug.validate()?;
    let len = cfg.example_len_samples;
    let t_out = len / ratio;

    let (refs, skipped_records) = plan_examples(train, len, ratio)?;
    if refs.is_empty() {
        return Err(TrainError::Argument(format!(
            "no training record is at least {len} samples long"
        )));
    }
    let val_examples = validation_examples(validation, len, ratio)?;
    if val_examples.is_empty() {
        return Err(TrainError::Argument(format!(
            "no validation record is at least {len} samples long"
        )));
    }

    let class_weights = match cfg.class_weights {
        ClassWeights::Fixed(w0, w1) => (w0, w1),
        ClassWeights::Auto => {
            // Inverse-frequency weights over the training records that
            // contribute examples, at the output rate.
            let mut targets = Vec::new();
            for (r, record) in train.iter().enumerate() {
                if refs.iter().any(|e| e.record == r) {
                    targets.extend(downsample_labels(&record.truth, ratio)?.values);
                }
            }
            auto_class_weights(&targets)?
        }
    };

    let mut adam = AdamState::new(weights.tensors.count());
    let mut scheduler =
        PlateauScheduler::new(cfg.initial_lr, cfg.lr_decay_factor, cfg.plateau_patience_epochs);
    let mut history: Vec<EpochStats> = Vec::new();
    let mut last_good = weights.clone();
    let mut best_weights = weights.clone();
    let mut best_epoch = 0usize;
    let mut best_val = f64::INFINITY;

    for epoch in 0..cfg.max_epochs {
        let lr = scheduler.lr();
        let mut rng = stream_rng(cfg.seed, &format!("train.epoch.{epoch}"));
        let mut order = refs.clone();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut outputs = 0usize;
        let mut failure: Option<String> = None;
        for chunk in order.chunks(cfg.batch_size) {
            let examples = augment_batch(chunk, train, len, ratio, aug, &mut rng)?;
            let real =
                Realization::draw(&spec, examples.len(), cfg.lstm_dropout_rate, &mut rng)?;
            let step = backward(&weights, &examples, class_weights, &real);
            let (loss, grads, stats) = match step {
                Ok(v) => v,
                Err(TrainError::NonFinite(msg)) => {
                    failure = Some(msg);
                    break;
                }
                Err(e) => return Err(e),
            };
            apply_running_update(&mut weights, &stats);
            let mut flat = weights.tensors.to_flat();
            match adam_step(&mut flat, &grads.to_flat(), &mut adam, lr) {
                Ok(()) => {}
                Err(TrainError::NonFinite(msg)) => {
                    failure = Some(msg);
                    break;
                }
                Err(e) => return Err(e),
            }
            weights.tensors.assign_flat(&flat)?;
            loss_sum += loss * examples.len() as f64;
            outputs += examples.len() * t_out;
        }
        if failure.is_none() {
            match validation_loss(&weights, &val_examples, class_weights) {
                Ok(val_loss) => {
                    let train_loss = loss_sum / outputs as f64;
                    let stats = EpochStats { epoch, lr, train_loss, val_loss };
                    history.push(stats.clone());
                    last_good = weights.clone();
                    if val_loss < best_val {
                        best_val = val_loss;
                        best_weights = weights.clone();
                        best_epoch = epoch;
                    }
                    observer(&stats, &weights);
                    scheduler.observe(val_loss);
                }
                Err(TrainError::NonFinite(msg)) => failure = Some(msg),
                Err(e) => return Err(e),
            }
        }
        if let Some(msg) = failure {
            return Ok(FitResult {
                weights: last_good.clone(),
                best_weights,
                best_epoch,
                history,
                class_weights,
                skipped_records,
                aborted: Some(format!("epoch {epoch}: {msg}")),
            });
        }
    }

    Ok(FitResult {
        weights,
        best_weights,
        best_epoch,
        history,
        class_weights,
        skipped_records,
        aborted: None,
    })
}

/// Train `weights` on `train`, scheduling against `validation`.
pub fn fit(
    weights: WeightStore<f64>,
    train: &[&Record],
    validation: &[&Record],
    cfg: &TrainConfig,
    aug: &AugmentConfig,
) -> Result<FitResult, TrainError> {
    fit_observed(weights, train, validation, cfg, aug, &mut |_, _| {})
}

/// Inference-mode loss over fixed examples, mean per output.
fn validation_loss(
    weights: &WeightStore<f64>,
    examples: &[super::Example],
    class_weights: (f64, f64),
) -> Result<f64, TrainError> {
    let mut sum = 0.0;
    let mut outputs = 0usize;
    for ex in examples {
        let (p, _) = forward_values(weights, &ex.x, 1.0, &[])?;
        let clamped: Vec<f64> =
            p.iter().map(|v| v.clamp(BCE_CLAMP_EPS, 1.0 - BCE_CLAMP_EPS)).collect();
        sum += weighted_bce(&clamped, &ex.y, class_weights)?;
        outputs += ex.y.len();
    }
    let loss = sum / outputs as f64;
    if !loss.is_finite() {
        return Err(TrainError::NonFinite(format!("validation loss {loss}")));
    }
    Ok(loss)
}

fn apply_running_update(weights: &mut WeightStore<f64>, stats: &BatchStats) {
    for (bi, (mean, var)) in stats.mean.iter().zip(&stats.var).enumerate() {
        for c in 0..mean.len() {
            weights.bn_mean[bi][c] = BN_MOMENTUM * weights.bn_mean[bi][c]
                + (1.0 - BN_MOMENTUM) * mean[c];
            weights.bn_var[bi][c] =
                BN_MOMENTUM * weights.bn_var[bi][c] + (1.0 - BN_MOMENTUM) * var[c];
        }
    }
}

/// Render history as CSV with an `epoch,lr,train_loss,val_loss`
/// header. Deterministic runs produce byte-identical output.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,lr,train_loss,val_loss\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch, row.lr, row.train_loss, row.val_loss
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ConvBlockSpec, ModelSpec};
    use crate::signal::{LabelSeries, SampleSeries, SourceTag};

    fn tiny_spec() -> ModelSpec {
        ModelSpec {
            input_channels: 1,
            conv_blocks: vec![
                ConvBlockSpec { out_channels: 2, kernel_len: 3, pool_len: 2 },
                ConvBlockSpec { out_channels: 2, kernel_len: 3, pool_len: 2 },
            ],
            lstm_hidden: 4,
        }
    }

    fn record(subject: &str, values: Vec<f64>, label: u8) -> Record {
        let n = values.len();
        let samples = SampleSeries::new(values, 20.0).unwrap();
        let truth = LabelSeries::binary(vec![label; n], 20.0).unwrap();
        Record::new(subject, samples, truth, SourceTag::Synthetic).unwrap()
    }

    /// Class 0 is a slow low-amplitude wave, class 1 a loud
    /// alternation; trivially separable by the conv features.
    fn toy_records(n: usize) -> (Record, Record) {
        let smooth: Vec<f64> =
            (0..n).map(|i| 0.3 * (i as f64 * std::f64::consts::TAU / 16.0).sin()).collect();
        let spiky: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        (record("a", smooth, 0), record("b", spiky, 1))
    }

    fn toy_config() -> TrainConfig {
        TrainConfig {
            example_len_samples: 64,
            batch_size: 4,
            max_epochs: 50,
            initial_lr: 0.01,
            lr_decay_factor: 0.5,
            plateau_patience_epochs: 4,
            class_weights: ClassWeights::Auto,
            lstm_dropout_rate: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn separable_toy_task_learns() {
        let (a, b) = toy_records(256);
        let short = record("c", vec![0.0; 10], 0);
        let train = [&a, &b, &short];
        let val = [&a, &b];
        let weights = WeightStore::init(&tiny_spec(), 2).unwrap();
        let out = fit(weights, &train, &val, &toy_config(), &AugmentConfig::none()).unwrap();
        assert!(out.aborted.is_none());
        assert_eq!(out.skipped_records, 1);
        assert_eq!(out.history.len(), 50);
        let first = out.history[0].train_loss;
        let last = out.history.last().unwrap().train_loss;
        assert!(
            last <= first / 10.0,
            "train loss went {first} -> {last}, expected a 10x drop"
        );
        assert!(out.history.last().unwrap().val_loss < std::f64::consts::LN_2);
        // Balanced classes give unit weights.
        assert_eq!(out.class_weights, (1.0, 1.0));
        assert!(out.best_epoch < 50);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let (a, b) = toy_records(256);
        let train = [&a, &b];
        let cfg = TrainConfig { max_epochs: 5, ..toy_config() };
        let run = || {
            let weights = WeightStore::init(&tiny_spec(), 2).unwrap();
            fit(weights, &train, &train, &cfg, &AugmentConfig::default()).unwrap()
        };
        let (r1, r2) = (run(), run());
        assert_eq!(history_csv(&r1.history), history_csv(&r2.history));
        let (f1, f2) = (r1.weights.tensors.to_flat(), r2.weights.tensors.to_flat());
        assert_eq!(f1.len(), f2.len());
        for (a, b) in f1.iter().zip(&f2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let other = TrainConfig { seed: 9, ..cfg };
        let weights = WeightStore::init(&tiny_spec(), 2).unwrap();
        let r3 = fit(weights, &train, &train, &other, &AugmentConfig::default()).unwrap();
        assert_ne!(history_csv(&r1.history), history_csv(&r3.history));
    }

    #[test]
    fn history_rows_are_well_formed() {
        let (a, b) = toy_records(256);
        let train = [&a, &b];
        let cfg = TrainConfig { max_epochs: 6, ..toy_config() };
        let weights = WeightStore::init(&tiny_spec(), 2).unwrap();
        let out = fit(weights, &train, &train, &cfg, &AugmentConfig::none()).unwrap();
        let csv = history_csv(&out.history);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,lr,train_loss,val_loss");
        assert_eq!(lines.len(), 7);
        for (e, row) in out.history.iter().enumerate() {
            assert_eq!(row.epoch, e);
            assert!(row.lr > 0.0 && row.lr <= cfg.initial_lr);
            assert!(row.train_loss.is_finite() && row.val_loss.is_finite());
        }
        // The learning rate never rises.
        for w in out.history.windows(2) {
            assert!(w[1].lr <= w[0].lr);
        }
    }

    #[test]
    fn plateau_decays_learning_rate_on_stall() {
        // Validation contradicts the training data (same signal, both
        // labels), so as the model grows confident the validation loss
        // only worsens and patience 1 decays the rate repeatedly.
        let (a, b) = toy_records(256);
        let spiky_as_zero = record("c", b.samples.values.clone(), 0);
        let spiky_as_one = record("d", b.samples.values.clone(), 1);
        let train = [&a, &b];
        let val = [&spiky_as_zero, &spiky_as_one];
        let cfg = TrainConfig {
            example_len_samples: 64,
            batch_size: 4,
            max_epochs: 10,
            initial_lr: 0.01,
            lr_decay_factor: 0.5,
            plateau_patience_epochs: 1,
            class_weights: ClassWeights::Auto,
            lstm_dropout_rate: 0.0,
            seed: 3,
        };
        let weights = WeightStore::init(&tiny_spec(), 4).unwrap();
        let out = fit(weights, &train, &val, &cfg, &AugmentConfig::none()).unwrap();
        let last = out.history.last().unwrap().lr;
        assert!(
            last <= cfg.initial_lr / 4.0,
            "expected repeated decay, got:\n{}",
            history_csv(&out.history)
        );
        let best = &out.history[out.best_epoch];
        assert!(out.history.iter().all(|r| r.val_loss >= best.val_loss));
    }

    #[test]
    fn aborts_on_nonfinite_loss_with_last_good_weights() {
        let (a, b) = toy_records(256);
        let train = [&a, &b];
        let mut weights = WeightStore::init(&tiny_spec(), 2).unwrap();
        weights.tensors.dense_b = f64::NAN;
        let initial = weights.tensors.to_flat();
        let out = fit(weights, &train, &train, &toy_config(), &AugmentConfig::none()).unwrap();
        assert!(out.aborted.is_some(), "expected an abort diagnostic");
        assert!(out.history.is_empty());
        // Rolled back to the starting weights, poison included.
        let rolled = out.weights.tensors.to_flat();
        assert_eq!(initial.len(), rolled.len());
        for (x, y) in initial.iter().zip(&rolled) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn auto_weights_follow_label_imbalance() {
        let (a, _) = toy_records(192);
        let minority = record("b", vec![1.0; 64], 1);
        let train = [&a, &minority];
        let cfg = TrainConfig { max_epochs: 1, ..toy_config() };
        let weights = WeightStore::init(&tiny_spec(), 2).unwrap();
        let out = fit(weights, &train, &train, &cfg, &AugmentConfig::none()).unwrap();
        // 48 negative and 16 positive targets at the output rate.
        assert!((out.class_weights.0 - 64.0 / 96.0).abs() < 1e-12);
        assert!((out.class_weights.1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn observer_sees_every_epoch() {
        let (a, b) = toy_records(256);
        let train = [&a, &b];
        let cfg = TrainConfig { max_epochs: 3, ..toy_config() };
        let weights = WeightStore::init(&tiny_spec(), 2).unwrap();
        let mut seen = Vec::new();
        let out = fit_observed(weights, &train, &train, &cfg, &AugmentConfig::none(), &mut |s, w| {
            seen.push((s.epoch, w.tensors.dense_b));
        })
        .unwrap();
        assert_eq!(seen.len(), 3);
        assert_eq!(seen.last().unwrap().1, out.weights.tensors.dense_b);
    }

    #[test]
    fn rejects_unusable_inputs() {
        let (a, b) = toy_records(256);
        let short = record("s", vec![0.0; 8], 0);
        let weights = WeightStore::init(&tiny_spec(), 2).unwrap();
        // Nothing long enough to train on.
        assert!(fit(
            weights.clone(),
            &[&short],
            &[&a],
            &toy_config(),
            &AugmentConfig::none()
        )
        .is_err());
        // Empty validation set.
        assert!(
            fit(weights.clone(), &[&a, &b], &[], &toy_config(), &AugmentConfig::none()).is_err()
        );
        // Example length not a multiple of the pooling factor.
        let cfg = TrainConfig { example_len_samples: 63, ..toy_config() };
        assert!(fit(weights, &[&a, &b], &[&a], &cfg, &AugmentConfig::none()).is_err());
    }
}
