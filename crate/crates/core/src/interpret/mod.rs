//! Post-hoc interpretation of trained models.
//!
//! Three views into what the network learned: the first conv layer
//! read as a bank of FIR filters, activation channels reordered by
//! correlation structure (hierarchical clustering plus optimal leaf
//! ordering), and LSTM hidden states projected onto a 2-D plane whose
//! first axis is the classifier's own decision direction.

mod embed;
mod fir;
mod ordering;

pub use embed::{
    project_embeddings, subsample_for_display, EmbeddingProjection, DISPLAY_STRIDE,
};
pub use fir::{analyze_filters, dc_gain_db, magnitude_response, ChannelFilter, FilterReport};
pub use ordering::{
    channel_distance, distance_matrix, hac, hac_average_linkage, normalize_lstm_signs,
    optimal_leaf_order, order_channels, ChannelOrdering, Linkage, LinkageMethod, Merge,
};

use thiserror::Error;

use crate::nn::NnError;

/// Errors raised by the interpretation tools.
#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}
