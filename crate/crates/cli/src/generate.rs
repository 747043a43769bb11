//! `rhythm generate`: a labelled synthetic dataset as record files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use rhythm_core::signal::save_record_text;
use rhythm_core::synth::{gen_dataset, GeneratorConfig};

use crate::manifest::RunManifest;
use crate::{CliError, Ctx};

#[derive(Args)]
pub struct GenerateArgs {
    /// Generator config file (`key = value` lines); missing keys and a
    /// missing file both fall back to the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of synthetic subjects.
    #[arg(long, default_value_t = 8)]
    pub subjects: usize,
}

pub fn run(ctx: &Ctx, args: &GenerateArgs) -> Result<(), CliError> {
    let config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            GeneratorConfig::parse(&text)?
        }
        None => GeneratorConfig::default(),
    };
    let config_paths: Vec<&Path> = args.config.iter().map(PathBuf::as_path).collect();
    RunManifest::new("generate", &config_paths, ctx.seed).write(&ctx.out)?;

    let dataset = gen_dataset(&config, args.subjects, ctx.seed)?;
    let mut per_subject: BTreeMap<&str, usize> = BTreeMap::new();
    for (record, _) in &dataset.records {
        let r = per_subject.entry(record.subject_id.as_str()).or_insert(0);
        let path = ctx.out.join(format!("{}_r{:02}.rec", record.subject_id, r));
        *r += 1;
        save_record_text(record, &path)?;
    }
    println!("wrote {} records to {}", dataset.records.len(), ctx.out.display());
    Ok(())
}
