//! Layer primitives. All take `[channels x time]` arrays and are
//! generic over the runtime scalar.

use ndarray::{Array1, Array2, Array3, ArrayView1};

use super::{LstmTensors, NnError, Scalar, GATE_F, GATE_G, GATE_I, GATE_O};

pub(crate) fn sigmoid<F: Scalar>(a: F) -> F {
    F::one() / (F::one() + (-a).exp())
}

fn check_conv_shapes<F: Scalar>(
    x: &Array2<F>,
    kernel: &Array3<F>,
    bias: &Array1<F>,
) -> Result<(usize, usize, usize), NnError> {
    let (out_ch, in_ch, k) = kernel.dim();
    if x.nrows() != in_ch {
        return Err(NnError::Shape(format!(
            "input has {} channels, kernel expects {in_ch}",
            x.nrows()
        )));
    }
    if bias.len() != out_ch {
        return Err(NnError::Shape(format!(
            "bias length {} does not match {out_ch} output channels",
            bias.len()
        )));
    }
    Ok((out_ch, in_ch, k))
}

/// 1-D cross-correlation with symmetric zero padding ("same"): output
/// time step `t` reads inputs `t - (k-1)/2 ..= t + (k-1)/2`.
pub fn conv1d<F: Scalar>(
    x: &Array2<F>,
    kernel: &Array3<F>,
    bias: &Array1<F>,
) -> Result<Array2<F>, NnError> {
    let (_, _, k) = check_conv_shapes(x, kernel, bias)?;
    if k % 2 == 0 {
        return Err(NnError::Argument(format!(
            "symmetric padding requires an odd kernel length, got {k}"
        )));
    }
    Ok(conv_with_left_pad(x, kernel, bias, (k - 1) / 2))
}

/// 1-D cross-correlation with causal zero padding: output time step
/// `t` reads inputs `t - (k-1) ..= t`. Equal to [`conv1d`] delayed by
/// `(k-1)/2` samples; this is the variant the model pipeline uses.
pub fn conv1d_causal<F: Scalar>(
    x: &Array2<F>,
    kernel: &Array3<F>,
    bias: &Array1<F>,
) -> Result<Array2<F>, NnError> {
    let (_, _, k) = check_conv_shapes(x, kernel, bias)?;
    Ok(conv_with_left_pad(x, kernel, bias, k - 1))
}

/// Shared kernel loop: output `t` reads inputs `t - left_pad + j` for
/// `j` in `0..k`, with out-of-range inputs read as zero.
fn conv_with_left_pad<F: Scalar>(
    x: &Array2<F>,
    kernel: &Array3<F>,
    bias: &Array1<F>,
    left_pad: usize,
) -> Array2<F> {
    let (out_ch, in_ch, k) = kernel.dim();
    let t_len = x.ncols();
    let mut y = Array2::zeros((out_ch, t_len));
    for c in 0..out_ch {
        for t in 0..t_len {
            let mut acc = bias[c];
            let base = t as isize - left_pad as isize;
            for i in 0..in_ch {
                for j in 0..k {
                    let src = base + j as isize;
                    if src >= 0 && (src as usize) < t_len {
                        acc += kernel[[c, i, j]] * x[[i, src as usize]];
                    }
                }
            }
            y[[c, t]] = acc;
        }
    }
    y
}

/// Elementwise `max(x, 0)`.
pub fn relu<F: Scalar>(x: &Array2<F>) -> Array2<F> {
    x.mapv(|v| v.max(F::zero()))
}

/// Inference-mode batch normalisation:
/// `(x - mean) / sqrt(var + eps) * gamma + beta`, per channel.
pub fn batchnorm_infer<F: Scalar>(
    x: &Array2<F>,
    gamma: &ArrayView1<F>,
    beta: &ArrayView1<F>,
    mean: &ArrayView1<F>,
    var: &ArrayView1<F>,
    eps: F,
) -> Result<Array2<F>, NnError> {
    let ch = x.nrows();
    for (name, len) in
        [("gamma", gamma.len()), ("beta", beta.len()), ("mean", mean.len()), ("var", var.len())]
    {
        if len != ch {
            return Err(NnError::Shape(format!(
                "{name} length {len} does not match {ch} channels"
            )));
        }
    }
    if var.iter().any(|&v| v < F::zero()) {
        return Err(NnError::Argument("var must be non-negative".into()));
    }
    let mut y = x.clone();
    for c in 0..ch {
        let scale = gamma[c] / (var[c] + eps).sqrt();
        let shift = beta[c] - mean[c] * scale;
        for v in y.row_mut(c) {
            *v = *v * scale + shift;
        }
    }
    Ok(y)
}

/// Non-overlapping max-pooling with stride `pool_len`; a trailing
/// partial window is dropped.
pub fn maxpool<F: Scalar>(x: &Array2<F>, pool_len: usize) -> Result<Array2<F>, NnError> {
    if pool_len == 0 {
        return Err(NnError::Argument("pool_len must be >= 1".into()));
    }
    let (ch, t_len) = x.dim();
    let n_out = t_len / pool_len;
    let mut y = Array2::zeros((ch, n_out));
    for c in 0..ch {
        for j in 0..n_out {
            let mut m = x[[c, j * pool_len]];
            for i in 1..pool_len {
                m = m.max(x[[c, j * pool_len + i]]);
            }
            y[[c, j]] = m;
        }
    }
    Ok(y)
}

/// One LSTM step (standard formulation with forget gate):
/// `i,f,o = sigmoid(Wx + Uh + b)`, `g = tanh(Wx + Uh + b)`,
/// `c' = f*c + i*g`, `h' = o*tanh(c')`. Updates `c` and `h` in place.
pub fn lstm_step<F: Scalar>(
    lstm: &LstmTensors<F>,
    x: ArrayView1<F>,
    c: &mut Array1<F>,
    h: &mut Array1<F>,
) -> Result<(), NnError> {
    let (hidden, input) = lstm.w[0].dim();
    if x.len() != input || c.len() != hidden || h.len() != hidden {
        return Err(NnError::Shape(format!(
            "lstm_step: x {} (want {input}), c {} / h {} (want {hidden})",
            x.len(),
            c.len(),
            h.len()
        )));
    }
    let pre = |g: usize| lstm.w[g].dot(&x) + lstm.u[g].dot(&*h) + &lstm.b[g];
    let gi = pre(GATE_I).mapv(sigmoid);
    let gf = pre(GATE_F).mapv(sigmoid);
    let gg = pre(GATE_G).mapv(F::tanh);
    let go = pre(GATE_O).mapv(sigmoid);
    for j in 0..hidden {
        c[j] = gf[j] * c[j] + gi[j] * gg[j];
        h[j] = go[j] * c[j].tanh();
    }
    Ok(())
}

/// Dense head: `sigmoid(h . w + b)`, clamped one epsilon away from 0
/// and 1 so outputs stay strictly inside (0,1) even under saturation.
pub fn dense_sigmoid<F: Scalar>(h: &ArrayView1<F>, w: &ArrayView1<F>, b: F) -> Result<F, NnError> {
    if h.len() != w.len() {
        return Err(NnError::Shape(format!(
            "dense: h length {} vs w length {}",
            h.len(),
            w.len()
        )));
    }
    let p = sigmoid(h.dot(w) + b);
    Ok(p.max(F::epsilon()).min(F::one() - F::epsilon()))
}
