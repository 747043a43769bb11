//! `rhythm inspect`: filter frequency report, per-layer channel
//! orderings and the decision-aligned embedding CSVs for one record.

use std::path::{Path, PathBuf};

use clap::Args;

use rhythm_core::interpret::{
    analyze_filters, order_channels, project_embeddings, subsample_for_display, LinkageMethod,
    DISPLAY_STRIDE,
};
use rhythm_core::nn::{layer_names, load_model};
use rhythm_core::signal::{downsample_labels, load_record, write_atomic};

use crate::manifest::RunManifest;
use crate::records::{forward_capture, output_time_s};
use crate::{CliError, Ctx};

/// Frequency grid size for the filter report: 0 to fs/2 inclusive.
const N_FREQ: usize = 11;

#[derive(Args)]
pub struct InspectArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Record to trace through the model.
    #[arg(long)]
    pub record: PathBuf,
    /// Layers given channel-ordering reports.
    #[arg(long, value_delimiter = ',', default_value = "maxpool_1,maxpool_2,lstm")]
    pub layers: Vec<String>,
}

pub fn run(ctx: &Ctx, args: &InspectArgs) -> Result<(), CliError> {
    RunManifest::new("inspect", &[args.model.as_path(), args.record.as_path()], ctx.seed)
        .write(&ctx.out)?;

    let weights = load_model(&args.model)?;
    let record = load_record(&args.record)?;
    let valid = layer_names(weights.spec.conv_blocks.len());
    for layer in &args.layers {
        if !valid.contains(layer) {
            return Err(CliError::Usage(format!(
                "unknown layer `{layer}`; valid layers: {}",
                valid.join(", ")
            )));
        }
    }

    let fs_hz = record.samples.sample_rate_hz;
    let filters = analyze_filters(&weights, N_FREQ, fs_hz)?;
    write_atomic(&ctx.out.join("filters.csv"), filters.csv().as_bytes())?;

    // One forward pass captures the requested layers plus the lstm
    // trace backing the embedding.
    let mut capture: Vec<&str> = args.layers.iter().map(String::as_str).collect();
    if !capture.contains(&"lstm") {
        capture.push("lstm");
    }
    let (probs, traces) = forward_capture(&weights, &record, ctx.precision, &capture)?;

    for layer in &args.layers {
        let trace = traces.iter().find(|t| &t.layer_name == layer).expect("captured layer");
        let ordering = order_channels(layer, &trace.activations, LinkageMethod::Average)?;
        let path = ctx.out.join(format!("ordering_{layer}.csv"));
        write_atomic(&path, ordering.csv().as_bytes())?;
    }

    let lstm = traces.iter().find(|t| t.layer_name == "lstm").expect("lstm trace");
    let x = lstm.activations.t().to_owned();
    let projection =
        project_embeddings(&x, &weights.tensors.dense_w.to_vec(), weights.tensors.dense_b)?;

    let pool = weights.spec.total_pool();
    let truth = downsample_labels(&record.truth, pool)?;
    let offset = record.samples.start_offset_s;
    let rows: Vec<String> = projection
        .points
        .iter()
        .enumerate()
        .map(|(j, point)| {
            format!(
                "{},{},{},{},{}",
                output_time_s(offset, fs_hz, pool, j),
                point[0],
                point[1],
                truth.values[j],
                probs[j]
            )
        })
        .collect();
    write_embedding(&ctx.out.join("embedding.csv"), &rows)?;
    let display = subsample_for_display(&rows, DISPLAY_STRIDE)?;
    write_embedding(&ctx.out.join("embedding_display.csv"), &display)?;

    println!("inspection reports in {}", ctx.out.display());
    Ok(())
}

fn write_embedding(path: &Path, rows: &[String]) -> Result<(), CliError> {
    let mut text = String::from("t_s,y0,y1,truth_label,prob\n");
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())?;
    Ok(())
}
