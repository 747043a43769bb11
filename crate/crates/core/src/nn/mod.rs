//! The conv-recurrent network: batch forward pass and an exactly
//! equivalent sample-by-sample streaming mode.
//!
//! The pipeline is conv blocks (convolution, batch normalisation, ReLU,
//! max-pooling) followed by an LSTM layer and a dense sigmoid head. All
//! pipeline convolutions are causal (each layer zero-extends its own
//! input on the left by `kernel_len - 1` samples), pooling windows start
//! at index 0, and the LSTM starts from a zero state. Under exactly
//! these conventions a streaming evaluator with zero-filled history
//! buffers computes the same function incrementally, so batch and
//! streaming outputs agree to the last bit rather than merely within a
//! tolerance. The standalone [`conv1d`] operation uses symmetric "same"
//! padding; [`conv1d_causal`] is the shifted variant the pipeline uses,
//! and the two agree at a fixed per-layer delay of `(kernel_len - 1)/2`
//! samples (see `layers` tests).

mod forward;
mod layers;
mod model_io;
mod stream;
mod weights;

pub use forward::{forward, forward_values, layer_names, LAYER_NAMES};
pub use layers::{
    batchnorm_infer, conv1d, conv1d_causal, dense_sigmoid, lstm_step, maxpool, relu,
};
pub use model_io::{load_model, save_model_binary, save_model_text};
pub use stream::StreamState;
pub use weights::{count_params, param_breakdown, ConvBlockTensors, LstmTensors, Tensors, WeightStore};

use ndarray::Array2;
use thiserror::Error;

/// Batch-normalisation epsilon used by the model pipeline.
pub const BN_EPS: f64 = 1e-3;

/// LSTM gate indices into the weight arrays: input, forget, candidate,
/// output.
pub const GATE_I: usize = 0;
pub const GATE_F: usize = 1;
pub const GATE_G: usize = 2;
pub const GATE_O: usize = 3;
pub const GATE_NAMES: [&str; 4] = ["i", "f", "g", "o"];

/// Errors raised by model construction, evaluation and I/O.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("model format error: {0}")]
    Format(String),
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Scalar type the runtime is generic over (f32 or f64).
pub trait Scalar: ndarray::NdFloat {
    fn from_f64(v: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn into_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn into_f64(self) -> f64 {
        f64::from(self)
    }
}

/// One conv block: convolution width/channels and its pooling factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBlockSpec {
    pub out_channels: usize,
    pub kernel_len: usize,
    pub pool_len: usize,
}

/// Architecture description. Weights are data (see [`WeightStore`]);
/// the spec pins every shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub input_channels: usize,
    pub conv_blocks: Vec<ConvBlockSpec>,
    pub lstm_hidden: usize,
}

impl ModelSpec {
    /// The default architecture: two conv blocks (12 channels, kernel 9,
    /// pool 4; then 16 channels, kernel 7, pool 4) and an LSTM with 36
    /// hidden units, for 9205 trainable parameters and an overall
    /// downsampling ratio of 1/16.
    pub fn default_arch() -> Self {
        Self {
            input_channels: 1,
            conv_blocks: vec![
                ConvBlockSpec { out_channels: 12, kernel_len: 9, pool_len: 4 },
                ConvBlockSpec { out_channels: 16, kernel_len: 7, pool_len: 4 },
            ],
            lstm_hidden: 36,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_channels == 0 || self.lstm_hidden == 0 {
            return Err(NnError::Argument("all dimensions must be >= 1".into()));
        }
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.out_channels == 0 || b.kernel_len == 0 || b.pool_len == 0 {
                return Err(NnError::Argument(format!(
                    "conv block {}: all dimensions must be >= 1",
                    i + 1
                )));
            }
            if b.kernel_len % 2 == 0 {
                return Err(NnError::Argument(format!(
                    "conv block {}: kernel_len must be odd, got {}",
                    i + 1,
                    b.kernel_len
                )));
            }
        }
        Ok(())
    }

    /// Product of pool lengths: input samples consumed per output.
    pub fn total_pool(&self) -> usize {
        self.conv_blocks.iter().map(|b| b.pool_len).product()
    }

    /// Input channel count of conv block `i`.
    pub fn block_in_channels(&self, i: usize) -> usize {
        if i == 0 {
            self.input_channels
        } else {
            self.conv_blocks[i - 1].out_channels
        }
    }

    /// Feature dimension entering the LSTM.
    pub fn lstm_input(&self) -> usize {
        self.conv_blocks.last().map_or(self.input_channels, |b| b.out_channels)
    }

    /// Encodes conv blocks as `out,kernel,pool;out,kernel,pool;...`.
    pub fn encode_blocks(&self) -> String {
        self.conv_blocks
            .iter()
            .map(|b| format!("{},{},{}", b.out_channels, b.kernel_len, b.pool_len))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Parses the [`encode_blocks`](Self::encode_blocks) format.
    pub fn parse_blocks(s: &str) -> Result<Vec<ConvBlockSpec>, NnError> {
        let mut blocks = Vec::new();
        for part in s.split(';') {
            let fields: Vec<&str> = part.split(',').collect();
            if fields.len() != 3 {
                return Err(NnError::Format(format!(
                    "conv block `{part}` must be `out,kernel,pool`"
                )));
            }
            let parse = |f: &str| -> Result<usize, NnError> {
                f.trim()
                    .parse()
                    .map_err(|_| NnError::Format(format!("bad integer `{f}` in conv block")))
            };
            blocks.push(ConvBlockSpec {
                out_channels: parse(fields[0])?,
                kernel_len: parse(fields[1])?,
                pool_len: parse(fields[2])?,
            });
        }
        Ok(blocks)
    }
}

/// A captured activation time series for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub layer_name: String,
    /// Row per channel, column per time step.
    pub activations: Array2<f64>,
    pub rate_hz: f64,
}
