//! `rhythm train`: subject-split training of the default architecture.

use std::path::PathBuf;

use clap::Args;

use rhythm_core::nn::{save_model_text, ModelSpec, WeightStore};
use rhythm_core::signal::{split_by_subject, write_atomic, Dataset, SplitTag};
use rhythm_core::train::{fit, history_csv, AugmentConfig, ClassWeights, TrainConfig};

use crate::manifest::RunManifest;
use crate::records::load_dir;
use crate::{parse_pair, CliError, Ctx, Precision};

#[derive(Args)]
pub struct TrainArgs {
    /// Directory of training records.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    /// Training subsequence length in samples (a multiple of 16).
    #[arg(long, default_value_t = 1920)]
    pub example_len: usize,
    /// Initial learning rate.
    #[arg(long, default_value_t = 2e-3)]
    pub lr: f64,
    /// Learning-rate decay factor on a validation plateau.
    #[arg(long, default_value_t = 0.5)]
    pub decay: f64,
    /// Epochs without validation improvement before a decay.
    #[arg(long, default_value_t = 2)]
    pub patience: usize,
    /// LSTM dropout rate during training.
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    /// Subject fraction assigned to the training split.
    #[arg(long, default_value_t = 0.6)]
    pub train_frac: f64,
    /// Subject fraction assigned to the validation split.
    #[arg(long, default_value_t = 0.2)]
    pub val_frac: f64,
    /// Disable augmentation entirely.
    #[arg(long)]
    pub no_augment: bool,
    /// Amplitude scale range, `lo,hi`.
    #[arg(long, value_parser = parse_pair, default_value = "0.7,1.3")]
    pub scale: (f64, f64),
    /// Additive offset range, `lo,hi`.
    #[arg(long, value_parser = parse_pair, default_value = "-0.5,0.5", allow_hyphen_values = true)]
    pub shift: (f64, f64),
    /// Gaussian noise sigma range, `lo,hi`.
    #[arg(long, value_parser = parse_pair, default_value = "0,0.15")]
    pub noise: (f64, f64),
}

pub fn run(ctx: &Ctx, args: &TrainArgs) -> Result<(), CliError> {
    if ctx.precision == Precision::F32 {
        return Err(CliError::Usage(
            "training runs in f64 only; drop --precision f32".into(),
        ));
    }
    RunManifest::new("train", &[args.data.as_path()], ctx.seed).write(&ctx.out)?;

    let records = load_dir(&args.data)?;
    let dataset =
        split_by_subject(Dataset::unsplit(records), (args.train_frac, args.val_frac), ctx.seed)?;
    let train = dataset.records_in(SplitTag::Train);
    let validation = dataset.records_in(SplitTag::Validation);

    let cfg = TrainConfig {
        example_len_samples: args.example_len,
        batch_size: args.batch_size,
        max_epochs: args.max_epochs,
        initial_lr: args.lr,
        lr_decay_factor: args.decay,
        plateau_patience_epochs: args.patience,
        class_weights: ClassWeights::Auto,
        lstm_dropout_rate: args.dropout,
        seed: ctx.seed,
    };
    let aug = if args.no_augment {
        AugmentConfig::none()
    } else {
        AugmentConfig {
            crop: true,
            scale_range: args.scale,
            shift_range: args.shift,
            noise_sigma_range: args.noise,
            per_example: true,
        }
    };

    let init = WeightStore::init(&ModelSpec::default_arch(), ctx.seed)?;
    let result = fit(init, &train, &validation, &cfg, &aug)?;

    save_model_text(&result.best_weights, &ctx.out.join("model.rsm"))?;
    write_atomic(&ctx.out.join("history.csv"), history_csv(&result.history).as_bytes())?;

    if let Some(msg) = &result.aborted {
        eprintln!("warning: training stopped early ({msg}); artifacts hold the last finite state");
    }
    println!(
        "trained {} epochs (best validation at epoch {}), artifacts in {}",
        result.history.len(),
        result.best_epoch,
        ctx.out.display()
    );
    Ok(())
}
