//! Weight containers, initialisation and parameter accounting.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;

use super::{ModelSpec, NnError, Scalar, GATE_F};
use crate::rng::stream_rng;

/// Trainable tensors of one conv block.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlockTensors<F> {
    /// `[out_channels, in_channels, kernel_len]`.
    pub kernel: Array3<F>,
    pub bias: Array1<F>,
    pub bn_gamma: Array1<F>,
    pub bn_beta: Array1<F>,
}

/// Trainable LSTM tensors, indexed by gate (`GATE_I..GATE_O`).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmTensors<F> {
    /// Input kernels, each `[hidden, input_dim]`.
    pub w: [Array2<F>; 4],
    /// Recurrent kernels, each `[hidden, hidden]`.
    pub u: [Array2<F>; 4],
    /// Biases, each `[hidden]`.
    pub b: [Array1<F>; 4],
}

/// Every trainable tensor of the model, in one structure. The same
/// shape is reused for gradients and optimizer moments; a canonical
/// flattening order (conv blocks in order, each kernel, bias, bn_gamma,
/// bn_beta; LSTM w by gate, u by gate, b by gate; dense w; dense b)
/// connects it to flat vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensors<F = f64> {
    pub conv: Vec<ConvBlockTensors<F>>,
    pub lstm: LstmTensors<F>,
    pub dense_w: Array1<F>,
    pub dense_b: F,
}

impl<F: Scalar> Tensors<F> {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let conv = (0..spec.conv_blocks.len())
            .map(|i| {
                let b = &spec.conv_blocks[i];
                let in_ch = spec.block_in_channels(i);
                ConvBlockTensors {
                    kernel: Array3::zeros((b.out_channels, in_ch, b.kernel_len)),
                    bias: Array1::zeros(b.out_channels),
                    bn_gamma: Array1::zeros(b.out_channels),
                    bn_beta: Array1::zeros(b.out_channels),
                }
            })
            .collect();
        let h = spec.lstm_hidden;
        let d = spec.lstm_input();
        let lstm = LstmTensors {
            w: std::array::from_fn(|_| Array2::zeros((h, d))),
            u: std::array::from_fn(|_| Array2::zeros((h, h))),
            b: std::array::from_fn(|_| Array1::zeros(h)),
        };
        Self { conv, lstm, dense_w: Array1::zeros(h), dense_b: F::zero() }
    }

    /// Total element count (the trainable parameter count).
    pub fn count(&self) -> usize {
        let mut n = 0;
        for c in &self.conv {
            n += c.kernel.len() + c.bias.len() + c.bn_gamma.len() + c.bn_beta.len();
        }
        for g in 0..4 {
            n += self.lstm.w[g].len() + self.lstm.u[g].len() + self.lstm.b[g].len();
        }
        n + self.dense_w.len() + 1
    }

    /// Copies all values into a flat vector in canonical order.
    pub fn to_flat(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.count());
        for c in &self.conv {
            out.extend(c.kernel.iter().copied());
            out.extend(c.bias.iter().copied());
            out.extend(c.bn_gamma.iter().copied());
            out.extend(c.bn_beta.iter().copied());
        }
        for t in 0..3 {
            for g in 0..4 {
                match t {
                    0 => out.extend(self.lstm.w[g].iter().copied()),
                    1 => out.extend(self.lstm.u[g].iter().copied()),
                    _ => out.extend(self.lstm.b[g].iter().copied()),
                }
            }
        }
        out.extend(self.dense_w.iter().copied());
        out.push(self.dense_b);
        out
    }

    /// Overwrites all values from a flat vector in canonical order.
    pub fn assign_flat(&mut self, flat: &[F]) -> Result<(), NnError> {
        if flat.len() != self.count() {
            return Err(NnError::Shape(format!(
                "flat vector has {} values, model has {} parameters",
                flat.len(),
                self.count()
            )));
        }
        let mut it = flat.iter().copied();
        let mut fill = |dst: &mut [F]| {
            for v in dst {
                *v = it.next().expect("length checked");
            }
        };
        for c in &mut self.conv {
            fill(c.kernel.as_slice_mut().expect("contiguous"));
            fill(c.bias.as_slice_mut().expect("contiguous"));
            fill(c.bn_gamma.as_slice_mut().expect("contiguous"));
            fill(c.bn_beta.as_slice_mut().expect("contiguous"));
        }
        for t in 0..3 {
            for g in 0..4 {
                match t {
                    0 => fill(self.lstm.w[g].as_slice_mut().expect("contiguous")),
                    1 => fill(self.lstm.u[g].as_slice_mut().expect("contiguous")),
                    _ => fill(self.lstm.b[g].as_slice_mut().expect("contiguous")),
                }
            }
        }
        fill(self.dense_w.as_slice_mut().expect("contiguous"));
        self.dense_b = it.next().expect("length checked");
        Ok(())
    }
}

/// Model weights: the trainable tensors plus batch-norm running
/// statistics (which are state, not parameters). Immutable during
/// inference and shareable across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore<F = f64> {
    pub spec: ModelSpec,
    pub tensors: Tensors<F>,
    /// Per-block batch-norm running mean, `[out_channels]`.
    pub bn_mean: Vec<Array1<F>>,
    /// Per-block batch-norm running variance, `[out_channels]`, >= 0.
    pub bn_var: Vec<Array1<F>>,
}

impl<F: Scalar> WeightStore<F> {
    /// Zero weights with identity batch-norm statistics.
    pub fn zeros(spec: &ModelSpec) -> Result<Self, NnError> {
        spec.validate()?;
        let tensors = Tensors::zeros(spec);
        let bn_mean =
            spec.conv_blocks.iter().map(|b| Array1::zeros(b.out_channels)).collect();
        let bn_var = spec
            .conv_blocks
            .iter()
            .map(|b| Array1::from_elem(b.out_channels, F::one()))
            .collect();
        Ok(Self { spec: spec.clone(), tensors, bn_mean, bn_var })
    }

    /// Checks shape consistency against the spec and `bn_var >= 0`.
    pub fn validate(&self) -> Result<(), NnError> {
        self.spec.validate()?;
        let nb = self.spec.conv_blocks.len();
        if self.tensors.conv.len() != nb || self.bn_mean.len() != nb || self.bn_var.len() != nb {
            return Err(NnError::Shape(format!(
                "expected {nb} conv blocks, got {} tensor sets",
                self.tensors.conv.len()
            )));
        }
        for (i, (b, t)) in self.spec.conv_blocks.iter().zip(&self.tensors.conv).enumerate() {
            let in_ch = self.spec.block_in_channels(i);
            if t.kernel.dim() != (b.out_channels, in_ch, b.kernel_len) {
                return Err(NnError::Shape(format!(
                    "conv block {}: kernel shape {:?}, expected {:?}",
                    i + 1,
                    t.kernel.dim(),
                    (b.out_channels, in_ch, b.kernel_len)
                )));
            }
            for (name, a) in [
                ("bias", &t.bias),
                ("bn_gamma", &t.bn_gamma),
                ("bn_beta", &t.bn_beta),
                ("bn_mean", &self.bn_mean[i]),
                ("bn_var", &self.bn_var[i]),
            ] {
                if a.len() != b.out_channels {
                    return Err(NnError::Shape(format!(
                        "conv block {}: {name} length {}, expected {}",
                        i + 1,
                        a.len(),
                        b.out_channels
                    )));
                }
            }
            if self.bn_var[i].iter().any(|&v| v < F::zero()) {
                return Err(NnError::Argument(format!(
                    "conv block {}: bn_var must be non-negative",
                    i + 1
                )));
            }
        }
        let (h, d) = (self.spec.lstm_hidden, self.spec.lstm_input());
        for g in 0..4 {
            if self.tensors.lstm.w[g].dim() != (h, d)
                || self.tensors.lstm.u[g].dim() != (h, h)
                || self.tensors.lstm.b[g].len() != h
            {
                return Err(NnError::Shape(format!("lstm gate {g}: inconsistent shapes")));
            }
        }
        if self.tensors.dense_w.len() != h {
            return Err(NnError::Shape(format!(
                "dense w length {}, expected {h}",
                self.tensors.dense_w.len()
            )));
        }
        Ok(())
    }

    /// Per-element cast (for running inference in another precision).
    pub fn cast<G: Scalar>(&self) -> WeightStore<G> {
        let conv = self
            .tensors
            .conv
            .iter()
            .map(|c| ConvBlockTensors {
                kernel: c.kernel.mapv(|v| G::from_f64(v.into_f64())),
                bias: c.bias.mapv(|v| G::from_f64(v.into_f64())),
                bn_gamma: c.bn_gamma.mapv(|v| G::from_f64(v.into_f64())),
                bn_beta: c.bn_beta.mapv(|v| G::from_f64(v.into_f64())),
            })
            .collect();
        let lstm = LstmTensors {
            w: std::array::from_fn(|g| self.tensors.lstm.w[g].mapv(|v| G::from_f64(v.into_f64()))),
            u: std::array::from_fn(|g| self.tensors.lstm.u[g].mapv(|v| G::from_f64(v.into_f64()))),
            b: std::array::from_fn(|g| self.tensors.lstm.b[g].mapv(|v| G::from_f64(v.into_f64()))),
        };
        WeightStore {
            spec: self.spec.clone(),
            tensors: Tensors {
                conv,
                lstm,
                dense_w: self.tensors.dense_w.mapv(|v| G::from_f64(v.into_f64())),
                dense_b: G::from_f64(self.tensors.dense_b.into_f64()),
            },
            bn_mean: self.bn_mean.iter().map(|a| a.mapv(|v| G::from_f64(v.into_f64()))).collect(),
            bn_var: self.bn_var.iter().map(|a| a.mapv(|v| G::from_f64(v.into_f64()))).collect(),
        }
    }
}

impl WeightStore<f64> {
    /// Fresh trainable weights: Glorot-uniform kernels, zero biases
    /// except the LSTM forget-gate bias at +1, identity batch norm.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self, NnError> {
        let mut store = Self::zeros(spec)?;
        let mut rng = stream_rng(seed, "nn.init");
        let mut glorot = |fan_in: usize, fan_out: usize, dst: &mut [f64]| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in dst {
                *v = rng.gen_range(-limit..=limit);
            }
        };

        for (i, c) in store.tensors.conv.iter_mut().enumerate() {
            let b = &spec.conv_blocks[i];
            let in_ch = spec.block_in_channels(i);
            glorot(
                in_ch * b.kernel_len,
                b.out_channels * b.kernel_len,
                c.kernel.as_slice_mut().expect("contiguous"),
            );
            c.bn_gamma.fill(1.0);
        }
        for v in &mut store.bn_var {
            v.fill(1.0);
        }
        let (h, d) = (spec.lstm_hidden, spec.lstm_input());
        for g in 0..4 {
            glorot(d, h, store.tensors.lstm.w[g].as_slice_mut().expect("contiguous"));
            glorot(h, h, store.tensors.lstm.u[g].as_slice_mut().expect("contiguous"));
        }
        store.tensors.lstm.b[GATE_F].fill(1.0);
        glorot(h, 1, store.tensors.dense_w.as_slice_mut().expect("contiguous"));
        Ok(store)
    }
}

/// Trainable parameter count implied by an architecture.
pub fn count_params(spec: &ModelSpec) -> usize {
    let (conv, lstm, dense) = param_breakdown(spec);
    conv + lstm + dense
}

/// Parameter counts of the (conv blocks, LSTM, dense head).
pub fn param_breakdown(spec: &ModelSpec) -> (usize, usize, usize) {
    let mut conv = 0;
    for (i, b) in spec.conv_blocks.iter().enumerate() {
        let in_ch = spec.block_in_channels(i);
        // kernel + bias + bn gamma/beta; running stats are not trained.
        conv += b.out_channels * in_ch * b.kernel_len + 3 * b.out_channels;
    }
    let (h, d) = (spec.lstm_hidden, spec.lstm_input());
    let lstm = 4 * (h * d + h * h + h);
    (conv, lstm, h + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelSpec;

    #[test]
    fn default_arch_param_count_is_in_band() {
        let spec = ModelSpec::default_arch();
        let n = count_params(&spec);
        assert_eq!(n, 9205);
        assert!((8000..=12000).contains(&n));
        let store = WeightStore::init(&spec, 0).unwrap();
        assert_eq!(store.tensors.count(), n);
    }

    #[test]
    fn dense_head_alone_counts_w_plus_b() {
        let spec = ModelSpec { lstm_hidden: 32, ..ModelSpec::default_arch() };
        let (_, _, dense) = param_breakdown(&spec);
        assert_eq!(dense, 33);
    }

    #[test]
    fn doubling_lstm_hidden_increases_count() {
        let spec = ModelSpec::default_arch();
        let doubled = ModelSpec { lstm_hidden: spec.lstm_hidden * 2, ..spec.clone() };
        assert!(count_params(&doubled) > count_params(&spec));
    }

    #[test]
    fn flat_round_trip_preserves_values() {
        let spec = ModelSpec::default_arch();
        let store = WeightStore::init(&spec, 3).unwrap();
        let flat = store.tensors.to_flat();
        assert_eq!(flat.len(), 9205);
        let mut other = Tensors::zeros(&spec);
        other.assign_flat(&flat).unwrap();
        assert_eq!(other, store.tensors);
    }

    #[test]
    fn init_is_deterministic_and_validates() {
        let spec = ModelSpec::default_arch();
        let a = WeightStore::init(&spec, 7).unwrap();
        let b = WeightStore::init(&spec, 7).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert!(a.tensors.lstm.b[GATE_F].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn validate_rejects_negative_bn_var() {
        let spec = ModelSpec::default_arch();
        let mut store = WeightStore::<f64>::zeros(&spec).unwrap();
        store.bn_var[0][0] = -1.0;
        assert!(store.validate().is_err());
    }

    #[test]
    fn cast_to_f32_preserves_shapes() {
        let spec = ModelSpec::default_arch();
        let store = WeightStore::init(&spec, 1).unwrap();
        let f32_store: WeightStore<f32> = store.cast();
        f32_store.validate().unwrap();
        assert_eq!(f32_store.tensors.count(), 9205);
    }
}
