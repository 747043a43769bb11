//! Incremental streaming evaluation.
//!
//! The state holds, per conv block, the last `kernel_len` inputs of
//! that block (zero-filled at start, matching the causal zero padding
//! of the batch pipeline) and a max-pooling accumulator, plus the LSTM
//! cell and hidden vectors. Because every stage mirrors the batch
//! computation operation for operation, emissions equal the batch
//! forward outputs exactly, not just within a tolerance. Memory is
//! constant in the stream length.

use ndarray::{Array1, Array2};

use super::layers::{dense_sigmoid, lstm_step};
use super::{ModelSpec, NnError, Scalar, WeightStore, BN_EPS};

#[derive(Debug, Clone)]
pub struct StreamState<F = f64> {
    spec: ModelSpec,
    /// Per block: the block's last `kernel_len` input vectors,
    /// `[in_ch, kernel_len]`, newest in the last column.
    hist: Vec<Array2<F>>,
    /// Per block: running window max per channel.
    pool_acc: Vec<Array1<F>>,
    pool_fill: Vec<usize>,
    c: Array1<F>,
    h: Array1<F>,
    samples_seen: u64,
}

impl<F: Scalar> StreamState<F> {
    pub fn new(weights: &WeightStore<F>) -> Result<Self, NnError> {
        weights.validate()?;
        let spec = weights.spec.clone();
        if spec.input_channels != 1 {
            return Err(NnError::Argument(format!(
                "streaming requires input_channels = 1, spec has {}",
                spec.input_channels
            )));
        }
        let hist = spec
            .conv_blocks
            .iter()
            .enumerate()
            .map(|(i, b)| Array2::zeros((spec.block_in_channels(i), b.kernel_len)))
            .collect();
        let pool_acc =
            spec.conv_blocks.iter().map(|b| Array1::zeros(b.out_channels)).collect();
        let pool_fill = vec![0; spec.conv_blocks.len()];
        let hidden = spec.lstm_hidden;
        Ok(Self {
            spec,
            hist,
            pool_acc,
            pool_fill,
            c: Array1::zeros(hidden),
            h: Array1::zeros(hidden),
            samples_seen: 0,
        })
    }

    /// Returns the state to its post-construction condition.
    pub fn reset(&mut self) {
        for h in &mut self.hist {
            h.fill(F::zero());
        }
        for a in &mut self.pool_acc {
            a.fill(F::zero());
        }
        for f in &mut self.pool_fill {
            *f = 0;
        }
        self.c.fill(F::zero());
        self.h.fill(F::zero());
        self.samples_seen = 0;
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    /// Feeds a chunk of raw samples; returns the probabilities emitted
    /// while consuming it (one per `total_pool` samples once warm). A
    /// chunk containing non-finite values is rejected whole, leaving
    /// the state untouched.
    pub fn push(&mut self, weights: &WeightStore<F>, chunk: &[F]) -> Result<Vec<F>, NnError> {
        if weights.spec != self.spec {
            return Err(NnError::Argument(
                "stream state was created for a different model spec".into(),
            ));
        }
        if let Some(bad) = chunk.iter().find(|v| !v.is_finite()) {
            return Err(NnError::Argument(format!(
                "chunk contains non-finite sample {bad}"
            )));
        }
        let mut out = Vec::new();
        for &x in chunk {
            if let Some(p) = self.push_sample(weights, x)? {
                out.push(p);
            }
        }
        Ok(out)
    }

    fn push_sample(&mut self, weights: &WeightStore<F>, x: F) -> Result<Option<F>, NnError> {
        self.samples_seen += 1;
        let mut vec_in = Array1::from_elem(1, x);
        for (b, block) in self.spec.conv_blocks.iter().enumerate() {
            // Slide the block's input window one step.
            let hist = &mut self.hist[b];
            let k = block.kernel_len;
            for (row, &v) in vec_in.iter().enumerate() {
                let slice = hist.row_mut(row).into_slice().expect("standard layout row");
                slice.copy_within(1..k, 0);
                slice[k - 1] = v;
            }

            // Causal conv at the newest time step, then batch norm and
            // ReLU, with the same per-channel scale/shift arithmetic as
            // the batch path.
            let t = &weights.tensors.conv[b];
            let in_ch = vec_in.len();
            let mut y = Array1::zeros(block.out_channels);
            for c in 0..block.out_channels {
                let mut acc = t.bias[c];
                for i in 0..in_ch {
                    for j in 0..k {
                        acc += t.kernel[[c, i, j]] * hist[[i, j]];
                    }
                }
                let scale = t.bn_gamma[c] / (weights.bn_var[b][c] + F::from_f64(BN_EPS)).sqrt();
                let shift = t.bn_beta[c] - weights.bn_mean[b][c] * scale;
                y[c] = (acc * scale + shift).max(F::zero());
            }

            // Pool accumulation; emit downstream when the window fills.
            if self.pool_fill[b] == 0 {
                self.pool_acc[b].assign(&y);
            } else {
                for (a, &v) in self.pool_acc[b].iter_mut().zip(y.iter()) {
                    *a = (*a).max(v);
                }
            }
            self.pool_fill[b] += 1;
            if self.pool_fill[b] < block.pool_len {
                return Ok(None);
            }
            self.pool_fill[b] = 0;
            vec_in = self.pool_acc[b].clone();
        }

        lstm_step(&weights.tensors.lstm, vec_in.view(), &mut self.c, &mut self.h)?;
        let p = dense_sigmoid(
            &self.h.view(),
            &weights.tensors.dense_w.view(),
            weights.tensors.dense_b,
        )?;
        Ok(Some(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{forward_values, ModelSpec};
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn weights(seed: u64) -> WeightStore<f64> {
        WeightStore::init(&ModelSpec::default_arch(), seed).unwrap()
    }

    fn input(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, "test.stream.input");
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn sample_by_sample_equals_batch_exactly() {
        let w = weights(0);
        let x = input(4800, 1);
        let (batch, _) = forward_values(&w, &x, 20.0, &[]).unwrap();

        let mut state = StreamState::new(&w).unwrap();
        let mut streamed = Vec::new();
        for &v in &x {
            streamed.extend(state.push(&w, &[v]).unwrap());
        }
        assert_eq!(streamed.len(), batch.len());
        for (s, b) in streamed.iter().zip(batch.iter()) {
            assert_eq!(s.to_bits(), b.to_bits());
        }

        let mut whole = StreamState::new(&w).unwrap();
        let all = whole.push(&w, &x).unwrap();
        assert_eq!(all, streamed);
    }

    #[test]
    fn emission_schedule_is_every_16th_sample() {
        let w = weights(2);
        let x = input(64, 3);
        let mut state = StreamState::new(&w).unwrap();
        assert!(state.push(&w, &x[..15]).unwrap().is_empty());
        assert_eq!(state.push(&w, &x[15..16]).unwrap().len(), 1);

        state.reset();
        let mut positions = Vec::new();
        for (i, &v) in x.iter().enumerate() {
            if !state.push(&w, &[v]).unwrap().is_empty() {
                positions.push(i);
            }
        }
        assert_eq!(positions, vec![15, 31, 47, 63]);
    }

    #[test]
    fn reset_then_replay_is_identical() {
        let w = weights(4);
        let x = input(320, 5);
        let mut state = StreamState::new(&w).unwrap();
        let first = state.push(&w, &x).unwrap();
        state.reset();
        assert_eq!(state.samples_seen(), 0);
        let second = state.push(&w, &x).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn nan_chunk_is_rejected_and_state_unchanged() {
        let w = weights(6);
        let x = input(32, 7);
        let mut clean = StreamState::new(&w).unwrap();
        let mut interrupted = StreamState::new(&w).unwrap();

        let expected = clean.push(&w, &x).unwrap();

        assert!(interrupted.push(&w, &x[..10]).unwrap().is_empty());
        let seen = interrupted.samples_seen();
        assert!(matches!(
            interrupted.push(&w, &[0.1, f64::NAN, 0.2]),
            Err(NnError::Argument(_))
        ));
        assert_eq!(interrupted.samples_seen(), seen);
        let rest = interrupted.push(&w, &x[10..]).unwrap();
        assert_eq!(rest, expected);
    }

    #[test]
    fn f32_streaming_equals_f32_batch() {
        let w64 = weights(8);
        let w: WeightStore<f32> = w64.cast();
        let x: Vec<f32> = input(960, 9).iter().map(|&v| v as f32).collect();
        let (batch, _) = forward_values(&w, &x, 20.0, &[]).unwrap();
        let mut state = StreamState::new(&w).unwrap();
        let streamed = state.push(&w, &x).unwrap();
        assert_eq!(streamed.len(), batch.len());
        for (s, b) in streamed.iter().zip(batch.iter()) {
            assert_eq!(s.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn mismatched_spec_is_rejected() {
        let w = weights(10);
        let mut other_spec = ModelSpec::default_arch();
        other_spec.lstm_hidden = 8;
        let other = WeightStore::init(&other_spec, 0).unwrap();
        let mut state = StreamState::new(&w).unwrap();
        assert!(matches!(state.push(&other, &[0.0]), Err(NnError::Argument(_))));
    }

    proptest! {
        // Any chunking of the input reproduces the batch output.
        #[test]
        fn arbitrary_chunking_matches_batch(
            seed in 0u64..50,
            cuts in proptest::collection::vec(1usize..200, 0..12),
        ) {
            let w = weights(11);
            let x = input(640, seed);
            let (batch, _) = forward_values(&w, &x, 20.0, &[]).unwrap();

            let mut state = StreamState::new(&w).unwrap();
            let mut streamed = Vec::new();
            let mut pos = 0usize;
            for cut in cuts {
                let end = (pos + cut).min(x.len());
                streamed.extend(state.push(&w, &x[pos..end]).unwrap());
                pos = end;
            }
            streamed.extend(state.push(&w, &x[pos..]).unwrap());
            prop_assert_eq!(streamed, batch);
        }
    }
}
