//! Exact backpropagation through the conv-recurrent network in
//! training mode: batch-statistics normalization, max-pool argmax
//! routing, variational LSTM dropout and random initial states.
//!
//! Randomness (dropout masks, initial LSTM states) is reified in a
//! [`Realization`] drawn up front, so the same realized loss can be
//! evaluated repeatedly; the finite-difference gradient check relies
//! on replaying one fixed realization.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::loss::{weighted_bce, BCE_CLAMP_EPS};
use super::{Example, TrainError};
use crate::nn::{ModelSpec, Tensors, WeightStore, BN_EPS, GATE_F, GATE_G, GATE_I, GATE_O};

/// Gradients share the trainable-tensor layout of the model.
pub type GradientStore = Tensors<f64>;

/// Per-block batch statistics from one training forward pass, used to
/// update the running inference statistics.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Vec<Array1<f64>>,
    /// Biased (population) variance.
    pub var: Vec<Array1<f64>>,
}

/// The sampled randomness of one training step: per-example LSTM
/// initial states and variational dropout masks. Masks are already
/// inverted-scaled (`1/keep` or `0`) and are shared across time steps
/// and gates; `mask_x` multiplies the LSTM input, `mask_h` the
/// recurrent state.
#[derive(Debug, Clone)]
pub struct Realization {
    pub c0: Vec<Array1<f64>>,
    pub h0: Vec<Array1<f64>>,
    pub mask_x: Vec<Array1<f64>>,
    pub mask_h: Vec<Array1<f64>>,
}

/// Initial LSTM states are drawn uniformly from this range during
/// training so the network cannot rely on an exact zero start.
pub const INIT_STATE_RANGE: f64 = 0.1;

impl Realization {
    /// Draw order per example: `c0`, `h0` (uniform in
    /// [-INIT_STATE_RANGE, INIT_STATE_RANGE]), then input mask, then
    /// recurrent mask.
    pub fn draw(
        spec: &ModelSpec,
        batch: usize,
        dropout_rate: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, TrainError> {
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(TrainError::Argument(format!(
                "dropout rate must be in [0,1), got {dropout_rate}"
            )));
        }
        let keep = 1.0 - dropout_rate;
        let hidden = spec.lstm_hidden;
        let input = spec.lstm_input();
        let draw_state = |rng: &mut dyn rand::RngCore, n: usize| {
            Array1::from_iter((0..n).map(|_| rng.gen_range(-INIT_STATE_RANGE..=INIT_STATE_RANGE)))
        };
        let draw_mask = |rng: &mut dyn rand::RngCore, n: usize| {
            Array1::from_iter((0..n).map(|_| {
                if rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            }))
        };
        let mut real = Self {
            c0: Vec::with_capacity(batch),
            h0: Vec::with_capacity(batch),
            mask_x: Vec::with_capacity(batch),
            mask_h: Vec::with_capacity(batch),
        };
        for _ in 0..batch {
            real.c0.push(draw_state(rng, hidden));
            real.h0.push(draw_state(rng, hidden));
            real.mask_x.push(draw_mask(rng, input));
            real.mask_h.push(draw_mask(rng, hidden));
        }
        Ok(real)
    }

    /// Zero initial states and unit masks, matching inference.
    pub fn inference(spec: &ModelSpec, batch: usize) -> Self {
        let hidden = spec.lstm_hidden;
        let input = spec.lstm_input();
        Self {
            c0: vec![Array1::zeros(hidden); batch],
            h0: vec![Array1::zeros(hidden); batch],
            mask_x: vec![Array1::ones(input); batch],
            mask_h: vec![Array1::ones(hidden); batch],
        }
    }

    fn check(&self, spec: &ModelSpec, batch: usize) -> Result<(), TrainError> {
        let hidden = spec.lstm_hidden;
        let input = spec.lstm_input();
        let sized = self.c0.len() == batch
            && self.h0.len() == batch
            && self.mask_x.len() == batch
            && self.mask_h.len() == batch
            && self.c0.iter().chain(&self.h0).chain(&self.mask_h).all(|a| a.len() == hidden)
            && self.mask_x.iter().all(|a| a.len() == input);
        if !sized {
            return Err(TrainError::Argument(format!(
                "realization does not match batch of {batch} with hidden {hidden}, input {input}"
            )));
        }
        Ok(())
    }
}

struct BlockCache {
    /// Block input, per example `[in_ch, t_in]`.
    x: Vec<Array2<f64>>,
    /// Conv output (pre-normalization).
    z: Vec<Array2<f64>>,
    /// Normalized output (pre-ReLU).
    bn_out: Vec<Array2<f64>>,
    /// Absolute source index of each pooled maximum.
    pool_src: Vec<Array2<usize>>,
    mean: Array1<f64>,
    var: Array1<f64>,
}

struct LstmCache {
    x_drop: Vec<Array2<f64>>,
    h_prev_drop: Vec<Array2<f64>>,
    /// Post-activation gate values, indexed by the GATE_* constants.
    gates: Vec<[Array2<f64>; 4]>,
    c: Vec<Array2<f64>>,
    h: Vec<Array2<f64>>,
}

struct ForwardPass {
    blocks: Vec<BlockCache>,
    lstm: LstmCache,
    /// Unclamped sigmoid outputs per example.
    p: Vec<Vec<f64>>,
    loss: f64,
}

fn validate_batch(
    model: &WeightStore<f64>,
    examples: &[Example],
    class_weights: (f64, f64),
    real: &Realization,
) -> Result<(usize, usize), TrainError> {
    model.validate()?;
    let spec = &model.spec;
    if spec.input_channels != 1 {
        return Err(TrainError::Argument(format!(
            "training expects input_channels = 1, spec has {}",
            spec.input_channels
        )));
    }
    if examples.is_empty() {
        return Err(TrainError::Argument("batch is empty".into()));
    }
    let (w0, w1) = class_weights;
    if !(w0 > 0.0 && w1 > 0.0) {
        return Err(TrainError::Argument(format!(
            "class weights must be positive, got ({w0}, {w1})"
        )));
    }
    let len = examples[0].x.len();
    let pool = spec.total_pool();
    if len == 0 || !len.is_multiple_of(pool) {
        return Err(TrainError::Argument(format!(
            "example length {len} must be a positive multiple of {pool}"
        )));
    }
    for (e, ex) in examples.iter().enumerate() {
        if ex.x.len() != len || ex.y.len() != len / pool {
            return Err(TrainError::Argument(format!(
                "example {e} has {} samples and {} targets, expected {len} and {}",
                ex.x.len(),
                ex.y.len(),
                len / pool
            )));
        }
        if let Some(v) = ex.x.iter().find(|v| !v.is_finite()) {
            return Err(TrainError::Argument(format!("example {e} contains {v}")));
        }
    }
    real.check(spec, examples.len())?;
    Ok((len, len / pool))
}

fn train_forward(
    model: &WeightStore<f64>,
    examples: &[Example],
    class_weights: (f64, f64),
    real: &Realization,
) -> Result<ForwardPass, TrainError> {
    let (len, t_out) = validate_batch(model, examples, class_weights, real)?;
    let spec = &model.spec;
    let b = examples.len();

    let mut cur: Vec<Array2<f64>> = examples
        .iter()
        .map(|ex| {
            Array2::from_shape_vec((1, len), ex.x.clone()).expect("example length checked")
        })
        .collect();

    let mut blocks = Vec::with_capacity(spec.conv_blocks.len());
    for (bi, block) in spec.conv_blocks.iter().enumerate() {
        let tensors = &model.tensors.conv[bi];
        let ch = block.out_channels;
        let z: Vec<Array2<f64>> = cur
            .iter()
            .map(|x| crate::nn::conv1d_causal(x, &tensors.kernel, &tensors.bias))
            .collect::<Result<_, _>>()?;
        let t_in = z[0].ncols();
        let n = (b * t_in) as f64;

        let mut mean = Array1::<f64>::zeros(ch);
        for ze in &z {
            for c in 0..ch {
                for t in 0..t_in {
                    mean[c] += ze[[c, t]];
                }
            }
        }
        mean.mapv_inplace(|s| s / n);
        let mut var = Array1::<f64>::zeros(ch);
        for ze in &z {
            for c in 0..ch {
                for t in 0..t_in {
                    let d = ze[[c, t]] - mean[c];
                    var[c] += d * d;
                }
            }
        }
        var.mapv_inplace(|s| s / n);

        let inv_std: Array1<f64> = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let bn_out: Vec<Array2<f64>> = z
            .iter()
            .map(|ze| {
                let mut out = ze.clone();
                for c in 0..ch {
                    let scale = tensors.bn_gamma[c] * inv_std[c];
                    let shift = tensors.bn_beta[c] - mean[c] * scale;
                    for t in 0..t_in {
                        out[[c, t]] = out[[c, t]] * scale + shift;
                    }
                }
                out
            })
            .collect();

        let t_pooled = t_in / block.pool_len;
        let mut pooled = Vec::with_capacity(b);
        let mut pool_src = Vec::with_capacity(b);
        for be in &bn_out {
            let mut out = Array2::zeros((ch, t_pooled));
            let mut src = Array2::zeros((ch, t_pooled));
            for c in 0..ch {
                for j in 0..t_pooled {
                    let start = j * block.pool_len;
                    let mut best = f64::max(be[[c, start]], 0.0);
                    let mut best_t = start;
                    for t in start + 1..start + block.pool_len {
                        let v = f64::max(be[[c, t]], 0.0);
                        if v > best {
                            best = v;
                            best_t = t;
                        }
                    }
                    out[[c, j]] = best;
                    src[[c, j]] = best_t;
                }
            }
            pooled.push(out);
            pool_src.push(src);
        }

        blocks.push(BlockCache { x: cur, z, bn_out, pool_src, mean, var });
        cur = pooled;
    }

    let hidden = spec.lstm_hidden;
    let input = spec.lstm_input();
    let lstm = &model.tensors.lstm;
    let mut cache = LstmCache {
        x_drop: Vec::with_capacity(b),
        h_prev_drop: Vec::with_capacity(b),
        gates: Vec::with_capacity(b),
        c: Vec::with_capacity(b),
        h: Vec::with_capacity(b),
    };
    let mut p: Vec<Vec<f64>> = Vec::with_capacity(b);
    let mut loss = 0.0;
    for (e, feats) in cur.iter().enumerate() {
        let mut x_drop = Array2::zeros((input, t_out));
        let mut h_prev_drop = Array2::zeros((hidden, t_out));
        let mut gates = [
            Array2::zeros((hidden, t_out)),
            Array2::zeros((hidden, t_out)),
            Array2::zeros((hidden, t_out)),
            Array2::zeros((hidden, t_out)),
        ];
        let mut cs = Array2::zeros((hidden, t_out));
        let mut hs = Array2::zeros((hidden, t_out));
        let mut c_prev = real.c0[e].clone();
        let mut h_prev = real.h0[e].clone();
        let mut probs = Vec::with_capacity(t_out);
        for t in 0..t_out {
            let xd: Array1<f64> = (0..input).map(|i| feats[[i, t]] * real.mask_x[e][i]).collect();
            let hd: Array1<f64> = (0..hidden).map(|r| h_prev[r] * real.mask_h[e][r]).collect();
            for (k, gate) in gates.iter_mut().enumerate() {
                let a = lstm.w[k].dot(&xd) + lstm.u[k].dot(&hd) + &lstm.b[k];
                for r in 0..hidden {
                    gate[[r, t]] = if k == GATE_G {
                        a[r].tanh()
                    } else {
                        1.0 / (1.0 + (-a[r]).exp())
                    };
                }
            }
            for r in 0..hidden {
                let c_t = gates[GATE_F][[r, t]] * c_prev[r]
                    + gates[GATE_I][[r, t]] * gates[GATE_G][[r, t]];
                cs[[r, t]] = c_t;
                hs[[r, t]] = gates[GATE_O][[r, t]] * c_t.tanh();
            }
            for i in 0..input {
                x_drop[[i, t]] = xd[i];
            }
            for r in 0..hidden {
                h_prev_drop[[r, t]] = hd[r];
                c_prev[r] = cs[[r, t]];
                h_prev[r] = hs[[r, t]];
            }
            let logit =
                (0..hidden).map(|r| model.tensors.dense_w[r] * hs[[r, t]]).sum::<f64>()
                    + model.tensors.dense_b;
            let prob = 1.0 / (1.0 + (-logit).exp());
            if !prob.is_finite() {
                return Err(TrainError::NonFinite(format!(
                    "example {e} output {t} produced probability {prob}"
                )));
            }
            probs.push(prob);
        }
        let clamped: Vec<f64> =
            probs.iter().map(|v| v.clamp(BCE_CLAMP_EPS, 1.0 - BCE_CLAMP_EPS)).collect();
        loss += weighted_bce(&clamped, &examples[e].y, class_weights)?;
        p.push(probs);
        cache.x_drop.push(x_drop);
        cache.h_prev_drop.push(h_prev_drop);
        cache.gates.push(gates);
        cache.c.push(cs);
        cache.h.push(hs);
    }
    loss /= b as f64;
    if !loss.is_finite() {
        return Err(TrainError::NonFinite(format!(
            "batch of {b} examples of {len} samples produced loss {loss}"
        )));
    }
    Ok(ForwardPass { blocks, lstm: cache, p, loss })
}

/// The realized training loss of one batch: per-example BCE summed
/// over outputs, averaged over the batch. Identical to the loss
/// reported by [`backward`].
pub fn batch_loss(
    model: &WeightStore<f64>,
    examples: &[Example],
    class_weights: (f64, f64),
    real: &Realization,
) -> Result<f64, TrainError> {
    Ok(train_forward(model, examples, class_weights, real)?.loss)
}

/// Loss, parameter gradients and batch statistics for one batch under
/// a fixed [`Realization`].
pub fn backward(
    model: &WeightStore<f64>,
    examples: &[Example],
    class_weights: (f64, f64),
    real: &Realization,
) -> Result<(f64, GradientStore, BatchStats), TrainError> {
    let pass = train_forward(model, examples, class_weights, real)?;
    let spec = &model.spec;
    let b = examples.len();
    let scale = 1.0 / b as f64;
    let (w0, w1) = class_weights;
    let hidden = spec.lstm_hidden;
    let input = spec.lstm_input();
    let t_out = pass.p[0].len();

    let mut grads = Tensors::zeros(spec);
    let lstm = &model.tensors.lstm;

    // Dense head and per-step hidden-state gradients.
    let mut d_hidden: Vec<Array2<f64>> = vec![Array2::zeros((hidden, t_out)); b];
    for e in 0..b {
        for t in 0..t_out {
            let p = pass.p[e][t];
            let y = examples[e].y[t];
            let w = if y == 1.0 { w1 } else { w0 };
            // Gradient of the clamped BCE: zero where the clamp is
            // active, w * (p - y) through the sigmoid elsewhere.
            let g = if p > BCE_CLAMP_EPS && p < 1.0 - BCE_CLAMP_EPS {
                scale * w * (p - y)
            } else {
                0.0
            };
            grads.dense_b += g;
            for r in 0..hidden {
                grads.dense_w[r] += g * pass.lstm.h[e][[r, t]];
                d_hidden[e][[r, t]] = g * model.tensors.dense_w[r];
            }
        }
    }

    // Backpropagation through time, one example at a time; gradients
    // accumulate across the batch.
    let mut d_features: Vec<Array2<f64>> = vec![Array2::zeros((input, t_out)); b];
    for e in 0..b {
        let gates = &pass.lstm.gates[e];
        let cs = &pass.lstm.c[e];
        let mut carry_h: Array1<f64> = Array1::zeros(hidden);
        let mut carry_c: Array1<f64> = Array1::zeros(hidden);
        for t in (0..t_out).rev() {
            let mut d_a = [
                Array1::zeros(hidden),
                Array1::zeros(hidden),
                Array1::zeros(hidden),
                Array1::zeros(hidden),
            ];
            for r in 0..hidden {
                let i = gates[GATE_I][[r, t]];
                let f = gates[GATE_F][[r, t]];
                let g = gates[GATE_G][[r, t]];
                let o = gates[GATE_O][[r, t]];
                let tanh_c = cs[[r, t]].tanh();
                let c_prev = if t > 0 { cs[[r, t - 1]] } else { real.c0[e][r] };
                let dh = d_hidden[e][[r, t]] + carry_h[r];
                let dc = carry_c[r] + dh * o * (1.0 - tanh_c * tanh_c);
                d_a[GATE_I][r] = dc * g * i * (1.0 - i);
                d_a[GATE_F][r] = dc * c_prev * f * (1.0 - f);
                d_a[GATE_G][r] = dc * i * (1.0 - g * g);
                d_a[GATE_O][r] = dh * tanh_c * o * (1.0 - o);
                carry_c[r] = dc * f;
            }
            for (k, da_k) in d_a.iter().enumerate() {
                for (r, &da) in da_k.iter().enumerate() {
                    if da == 0.0 {
                        continue;
                    }
                    grads.lstm.b[k][r] += da;
                    for i in 0..input {
                        grads.lstm.w[k][[r, i]] += da * pass.lstm.x_drop[e][[i, t]];
                    }
                    for i in 0..hidden {
                        grads.lstm.u[k][[r, i]] += da * pass.lstm.h_prev_drop[e][[i, t]];
                    }
                }
            }
            for r in 0..hidden {
                let mut s = 0.0;
                for (u_k, da_k) in lstm.u.iter().zip(&d_a) {
                    for (row, &da) in da_k.iter().enumerate() {
                        s += u_k[[row, r]] * da;
                    }
                }
                carry_h[r] = real.mask_h[e][r] * s;
            }
            for i in 0..input {
                let mut s = 0.0;
                for (w_k, da_k) in lstm.w.iter().zip(&d_a) {
                    for (row, &da) in da_k.iter().enumerate() {
                        s += w_k[[row, i]] * da;
                    }
                }
                d_features[e][[i, t]] = real.mask_x[e][i] * s;
            }
        }
    }

    // Conv blocks in reverse: un-pool, ReLU mask, batch-norm, conv.
    let mut stats = BatchStats { mean: Vec::new(), var: Vec::new() };
    let mut d_out = d_features;
    for (bi, block) in spec.conv_blocks.iter().enumerate().rev() {
        let cache = &pass.blocks[bi];
        let tensors = &model.tensors.conv[bi];
        let ch = block.out_channels;
        let t_in = cache.z[0].ncols();
        let in_ch = cache.x[0].nrows();
        let k = block.kernel_len;
        let n = (b * t_in) as f64;
        let inv_std: Array1<f64> = cache.var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());

        // Route pooled gradients to their argmax source, then apply
        // the ReLU mask.
        let mut d_bn: Vec<Array2<f64>> = vec![Array2::zeros((ch, t_in)); b];
        for (e, dst) in d_bn.iter_mut().enumerate() {
            let t_pooled = d_out[e].ncols();
            for c in 0..ch {
                for j in 0..t_pooled {
                    let t = cache.pool_src[e][[c, j]];
                    if cache.bn_out[e][[c, t]] > 0.0 {
                        dst[[c, t]] += d_out[e][[c, j]];
                    }
                }
            }
        }

        // Batch-norm backward over the whole batch per channel:
        // dz = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)).
        let mut sum1 = Array1::<f64>::zeros(ch);
        let mut sum2 = Array1::<f64>::zeros(ch);
        for (e, dy_e) in d_bn.iter().enumerate() {
            for c in 0..ch {
                for t in 0..t_in {
                    let dy = dy_e[[c, t]];
                    let xhat = (cache.z[e][[c, t]] - cache.mean[c]) * inv_std[c];
                    grads.conv[bi].bn_gamma[c] += dy * xhat;
                    grads.conv[bi].bn_beta[c] += dy;
                    let dxhat = dy * tensors.bn_gamma[c];
                    sum1[c] += dxhat;
                    sum2[c] += dxhat * xhat;
                }
            }
        }
        let mut d_z: Vec<Array2<f64>> = vec![Array2::zeros((ch, t_in)); b];
        for e in 0..b {
            for c in 0..ch {
                for t in 0..t_in {
                    let xhat = (cache.z[e][[c, t]] - cache.mean[c]) * inv_std[c];
                    let dxhat = d_bn[e][[c, t]] * tensors.bn_gamma[c];
                    d_z[e][[c, t]] = inv_std[c] * (dxhat - sum1[c] / n - xhat * sum2[c] / n);
                }
            }
        }

        // Conv backward mirrors the causal forward indexing: output t
        // reads input t - (k - 1) + j.
        let mut d_x: Vec<Array2<f64>> = vec![Array2::zeros((in_ch, t_in)); b];
        for e in 0..b {
            for c in 0..ch {
                for t in 0..t_in {
                    let dz = d_z[e][[c, t]];
                    if dz == 0.0 {
                        continue;
                    }
                    grads.conv[bi].bias[c] += dz;
                    for i in 0..in_ch {
                        for j in 0..k {
                            let s = (t + j).wrapping_sub(k - 1);
                            if s < t_in {
                                grads.conv[bi].kernel[[c, i, j]] += dz * cache.x[e][[i, s]];
                                d_x[e][[i, s]] += dz * tensors.kernel[[c, i, j]];
                            }
                        }
                    }
                }
            }
        }

        stats.mean.insert(0, cache.mean.clone());
        stats.var.insert(0, cache.var.clone());
        d_out = d_x;
    }

    Ok((pass.loss, grads, stats))
}
