//! `rhythm eval`: ROC/AUC, operating points, Brier score and the
//! minimum-detectable-episode harness over a directory of records.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};

use rhythm_core::metrics::{brier, min_detectable_episode, operating_point, roc};
use rhythm_core::nn::load_model;
use rhythm_core::signal::{
    downsample_labels, split_by_subject, write_atomic, Dataset, Record, SplitTag,
};
use rhythm_core::synth::GeneratorConfig;

use crate::manifest::RunManifest;
use crate::records::{forward_probs, load_dir};
use crate::{CliError, Ctx};

/// Detection threshold applied by the episode harness.
const EPISODE_THRESHOLD: f64 = 0.5;

#[derive(Args)]
pub struct EvalArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of records to evaluate.
    #[arg(long)]
    pub data: PathBuf,
    /// Decision thresholds, one operating-point row each.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub thresholds: Vec<f64>,
    /// Evaluate only this subject split (assignment depends on the
    /// subject set, the fractions and the global seed, so it matches a
    /// training run over the same data).
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    /// Subject fraction assigned to the training split.
    #[arg(long, default_value_t = 0.6)]
    pub train_frac: f64,
    /// Subject fraction assigned to the validation split.
    #[arg(long, default_value_t = 0.2)]
    pub val_frac: f64,
    /// Generator config driving the episode harness.
    #[arg(long)]
    pub gen_config: Option<PathBuf>,
    /// Episode durations in seconds, strictly ascending.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,50,100,200")]
    pub durations: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    All,
    Train,
    Validation,
    Test,
}

pub fn run(ctx: &Ctx, args: &EvalArgs) -> Result<(), CliError> {
    let mut config_paths: Vec<&Path> = vec![args.model.as_path(), args.data.as_path()];
    if let Some(p) = &args.gen_config {
        config_paths.push(p);
    }
    RunManifest::new("eval", &config_paths, ctx.seed).write(&ctx.out)?;

    let weights = load_model(&args.model)?;
    let records = load_dir(&args.data)?;
    let records: Vec<Record> = match args.split {
        SplitArg::All => records,
        tag => {
            let want = match tag {
                SplitArg::Train => SplitTag::Train,
                SplitArg::Validation => SplitTag::Validation,
                _ => SplitTag::Test,
            };
            let split = split_by_subject(
                Dataset::unsplit(records),
                (args.train_frac, args.val_frac),
                ctx.seed,
            )?;
            split.records.into_iter().filter(|(_, t)| *t == want).map(|(r, _)| r).collect()
        }
    };
    if records.is_empty() {
        return Err(CliError::Usage("selected split contains no records".into()));
    }

    // Raw per-output pairs pooled across records at the model rate.
    let pool = weights.spec.total_pool();
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for record in &records {
        probs.extend(forward_probs(&weights, record, ctx.precision)?);
        labels.extend(downsample_labels(&record.truth, pool)?.values);
    }

    let curve = roc(&probs, &labels)?;
    let brier_score = brier(&probs, &labels)?;
    write_atomic(&ctx.out.join("roc.csv"), curve.csv().as_bytes())?;

    let mut summary = String::from(
        "threshold,auc,brier,sensitivity,specificity,fpr,fnr,\
         true_positives,false_positives,true_negatives,false_negatives\n",
    );
    for &t in &args.thresholds {
        let op = operating_point(&probs, &labels, t)?;
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{},{},{}",
            op.threshold,
            curve.auc,
            brier_score,
            op.sensitivity,
            op.specificity,
            op.fpr,
            op.fnr,
            op.true_positives,
            op.false_positives,
            op.true_negatives,
            op.false_negatives
        )
        .expect("write to string");
    }
    write_atomic(&ctx.out.join("summary.csv"), summary.as_bytes())?;

    let gen_config = match &args.gen_config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            GeneratorConfig::parse(&text)?
        }
        None => GeneratorConfig::default(),
    };
    let episodes =
        min_detectable_episode(&weights, &gen_config, &args.durations, EPISODE_THRESHOLD, ctx.seed)?;
    write_atomic(&ctx.out.join("episodes.csv"), episodes.csv().as_bytes())?;

    println!(
        "auc={} brier={} over {} outputs from {} records",
        curve.auc,
        brier_score,
        probs.len(),
        records.len()
    );
    Ok(())
}
