//! Whole-sequence forward pass with optional activation capture.

use ndarray::{Array1, Array2};

use super::layers::{batchnorm_infer, conv1d_causal, dense_sigmoid, lstm_step, relu};
use super::{ActivationTrace, NnError, Scalar, WeightStore, BN_EPS};
use crate::signal::{LabelSeries, SampleSeries};

/// Capture names available for a model with `n_blocks` conv blocks:
/// `conv_i`, `bn_i`, `relu_i`, `maxpool_i` (1-based), `lstm`, `dense`.
pub fn layer_names(n_blocks: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(4 * n_blocks + 2);
    for i in 1..=n_blocks {
        for stage in ["conv", "bn", "relu", "maxpool"] {
            names.push(format!("{stage}_{i}"));
        }
    }
    names.push("lstm".into());
    names.push("dense".into());
    names
}

/// Runs the full pipeline over raw samples.
///
/// Convolutions are causal and pooling starts at index 0, so the output
/// has exactly `floor(len(x) / total_pool)` probabilities and a
/// streaming evaluator reproduces them bit for bit. The LSTM starts
/// from a zero state. Requested capture names must come from
/// [`layer_names`].
pub fn forward_values<F: Scalar>(
    weights: &WeightStore<F>,
    x: &[F],
    fs_hz: f64,
    capture: &[&str],
) -> Result<(Vec<F>, Vec<ActivationTrace>), NnError> {
    weights.validate()?;
    let spec = &weights.spec;
    if spec.input_channels != 1 {
        return Err(NnError::Argument(format!(
            "sample input requires input_channels = 1, spec has {}",
            spec.input_channels
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NnError::Argument("input contains non-finite samples".into()));
    }
    let valid = layer_names(spec.conv_blocks.len());
    for name in capture {
        if !valid.iter().any(|v| v == name) {
            return Err(NnError::Argument(format!("unknown capture layer `{name}`")));
        }
    }

    let mut traces = Vec::new();
    let mut grab = |name: String, data: &Array2<F>, rate: f64| {
        if capture.iter().any(|&c| c == name) {
            traces.push(ActivationTrace {
                layer_name: name,
                activations: data.mapv(Scalar::into_f64),
                rate_hz: rate,
            });
        }
    };

    let mut cur = Array2::from_shape_vec((1, x.len()), x.to_vec())
        .expect("row matrix from slice");
    let mut rate = fs_hz;
    for (bi, block) in spec.conv_blocks.iter().enumerate() {
        let t = &weights.tensors.conv[bi];
        cur = conv1d_causal(&cur, &t.kernel, &t.bias)?;
        grab(format!("conv_{}", bi + 1), &cur, rate);
        cur = batchnorm_infer(
            &cur,
            &t.bn_gamma.view(),
            &t.bn_beta.view(),
            &weights.bn_mean[bi].view(),
            &weights.bn_var[bi].view(),
            F::from_f64(BN_EPS),
        )?;
        grab(format!("bn_{}", bi + 1), &cur, rate);
        cur = relu(&cur);
        grab(format!("relu_{}", bi + 1), &cur, rate);
        cur = super::layers::maxpool(&cur, block.pool_len)?;
        rate /= block.pool_len as f64;
        grab(format!("maxpool_{}", bi + 1), &cur, rate);
    }

    let hidden = spec.lstm_hidden;
    let steps = cur.ncols();
    let mut c = Array1::<F>::zeros(hidden);
    let mut h = Array1::<F>::zeros(hidden);
    let mut probs = Vec::with_capacity(steps);
    let mut lstm_trace =
        capture.contains(&"lstm").then(|| Array2::<F>::zeros((hidden, steps)));
    for t in 0..steps {
        let x_t = cur.column(t).to_owned();
        lstm_step(&weights.tensors.lstm, x_t.view(), &mut c, &mut h)?;
        if let Some(tr) = &mut lstm_trace {
            tr.column_mut(t).assign(&h);
        }
        probs.push(dense_sigmoid(
            &h.view(),
            &weights.tensors.dense_w.view(),
            weights.tensors.dense_b,
        )?);
    }
    if let Some(tr) = lstm_trace {
        grab("lstm".into(), &tr, rate);
    }
    if capture.contains(&"dense") {
        let row = Array2::from_shape_vec((1, steps), probs.clone()).expect("row matrix");
        grab("dense".into(), &row, rate);
    }
    Ok((probs, traces))
}

/// [`forward_values`] over a [`SampleSeries`], packaging the output as
/// a probability [`LabelSeries`] at `fs / total_pool`.
pub fn forward(
    weights: &WeightStore<f64>,
    x: &SampleSeries,
    capture: &[&str],
) -> Result<(LabelSeries, Vec<ActivationTrace>), NnError> {
    let (probs, traces) = forward_values(weights, &x.values, x.sample_rate_hz, capture)?;
    let rate = x.sample_rate_hz / weights.spec.total_pool() as f64;
    let labels = LabelSeries::new(probs, rate)
        .map_err(|e| NnError::Argument(format!("output packaging failed: {e}")))?;
    Ok((labels, traces))
}

/// Canonical capture names for the default two-block architecture.
pub const LAYER_NAMES: [&str; 10] = [
    "conv_1", "bn_1", "relu_1", "maxpool_1", "conv_2", "bn_2", "relu_2", "maxpool_2", "lstm",
    "dense",
];
