//! 2-D projection of hidden states around the decision boundary.

use ndarray::Array2;

use super::InterpretError;

/// Display stride used in the reference figures: every 15th step.
pub const DISPLAY_STRIDE: usize = 15;

/// Hidden states projected onto the plane spanned by the classifier
/// direction and the dominant residual direction. The decision
/// boundary is the vertical line `y0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingProjection {
    /// `[y0, y1]` per input row.
    pub points: Vec<[f64; 2]>,
    /// Unit-norm classifier weights.
    pub w_hat: Vec<f64>,
    /// Bias under the same scaling, so `y0 = x . w_hat + b_hat`.
    pub b_hat: f64,
}

/// Projects rows of `x` (one hidden state per row) onto the classifier
/// axis (`y0`) and the first principal component of the centered
/// residuals (`y1`). Scaling by `1/|w|` preserves the sign of the raw
/// logit, so `y0 > 0` exactly where the classifier says positive.
/// Residuals with zero variance give `y1 = 0` everywhere.
pub fn project_embeddings(
    x: &Array2<f64>,
    w: &[f64],
    b: f64,
) -> Result<EmbeddingProjection, InterpretError> {
    let (n, h) = x.dim();
    if n < 2 {
        return Err(InterpretError::Argument(format!("need >= 2 points, got {n}")));
    }
    if w.len() != h {
        return Err(InterpretError::Argument(format!(
            "w has {} entries for {h}-dimensional states",
            w.len()
        )));
    }
    if !(x.iter().chain(w).all(|v| v.is_finite()) && b.is_finite()) {
        return Err(InterpretError::Argument("states, w and b must be finite".into()));
    }
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(InterpretError::Argument("w must be non-zero".into()));
    }
    let w_hat: Vec<f64> = w.iter().map(|v| v / norm).collect();
    let b_hat = b / norm;

    let y0: Vec<f64> = (0..n)
        .map(|i| x.row(i).iter().zip(&w_hat).map(|(v, w)| v * w).sum::<f64>() + b_hat)
        .collect();

    // Residuals, centered across points.
    let mut resid = Array2::zeros((n, h));
    for i in 0..n {
        for j in 0..h {
            resid[[i, j]] = x[[i, j]] - y0[i] * w_hat[j];
        }
    }
    for j in 0..h {
        let mean = resid.column(j).sum() / n as f64;
        resid.column_mut(j).mapv_inplace(|v| v - mean);
    }

    let mut cov = Array2::zeros((h, h));
    for a in 0..h {
        for c in a..h {
            let s = resid.column(a).iter().zip(resid.column(c)).map(|(x, y)| x * y).sum::<f64>()
                / (n - 1) as f64;
            cov[[a, c]] = s;
            cov[[c, a]] = s;
        }
    }

    let y1: Vec<f64> = match dominant_direction(&cov) {
        Some(pc) => (0..n)
            .map(|i| resid.row(i).iter().zip(&pc).map(|(v, p)| v * p).sum())
            .collect(),
        None => vec![0.0; n],
    };

    let points = y0.iter().zip(&y1).map(|(&a, &b)| [a, b]).collect();
    Ok(EmbeddingProjection { points, w_hat, b_hat })
}

/// Dominant eigenvector of a symmetric PSD matrix by power iteration,
/// started from the largest-variance coordinate. None for an all-zero
/// matrix. The largest-magnitude loading is made positive, so the
/// direction is reproducible.
fn dominant_direction(cov: &Array2<f64>) -> Option<Vec<f64>> {
    let h = cov.dim().0;
    let start = (0..h).max_by(|&a, &b| cov[[a, a]].partial_cmp(&cov[[b, b]]).unwrap())?;
    if cov[[start, start]] == 0.0 {
        return None;
    }
    let mut v = vec![0.0; h];
    v[start] = 1.0;
    for _ in 0..10_000 {
        let mut next: Vec<f64> =
            (0..h).map(|a| (0..h).map(|c| cov[[a, c]] * v[c]).sum()).collect();
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        for x in &mut next {
            *x /= norm;
        }
        let delta =
            v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-14 {
            break;
        }
    }
    let lead = (0..h).max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap())?;
    if v[lead] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    Some(v)
}

/// Keeps every `stride`-th point, starting from the first.
pub fn subsample_for_display<T: Clone>(
    points: &[T],
    stride: usize,
) -> Result<Vec<T>, InterpretError> {
    if stride == 0 {
        return Err(InterpretError::Argument("stride must be >= 1".into()));
    }
    Ok(points.iter().step_by(stride).cloned().collect())
}
