//! Class-weighted binary cross-entropy.

use super::TrainError;

/// Probabilities are clamped to `[BCE_CLAMP_EPS, 1 - BCE_CLAMP_EPS]`
/// before the loss so a saturated sigmoid cannot produce an infinite
/// log term.
pub const BCE_CLAMP_EPS: f64 = 1e-7;

/// Weighted BCE summed over all outputs:
/// `sum_j w(y_j) * (-y_j ln p_j - (1 - y_j) ln(1 - p_j))`.
///
/// `weights` is `(w0, w1)` applied by target class. Probabilities must
/// lie strictly inside (0, 1); callers clamp first.
pub fn weighted_bce(p: &[f64], y: &[f64], weights: (f64, f64)) -> Result<f64, TrainError> {
    if p.len() != y.len() {
        return Err(TrainError::Argument(format!(
            "probability/target length mismatch: {} vs {}",
            p.len(),
            y.len()
        )));
    }
    let (w0, w1) = weights;
    if !(w0 > 0.0 && w1 > 0.0) {
        return Err(TrainError::Argument(format!(
            "class weights must be positive, got ({w0}, {w1})"
        )));
    }
    let mut loss = 0.0;
    for (j, (&pj, &yj)) in p.iter().zip(y).enumerate() {
        if !(pj > 0.0 && pj < 1.0) {
            return Err(TrainError::Argument(format!(
                "probability out of domain at index {j}: {pj}"
            )));
        }
        loss += if yj == 0.0 {
            -w0 * (1.0 - pj).ln()
        } else if yj == 1.0 {
            -w1 * pj.ln()
        } else {
            return Err(TrainError::Argument(format!(
                "target out of domain at index {j}: {yj}"
            )));
        };
    }
    Ok(loss)
}

/// Inverse-frequency class weights `w_c = N / (2 * N_c)` over binary
/// targets. Errors when either class is absent.
pub fn auto_class_weights(targets: &[f64]) -> Result<(f64, f64), TrainError> {
    let mut n1 = 0usize;
    for (j, &t) in targets.iter().enumerate() {
        if t == 1.0 {
            n1 += 1;
        } else if t != 0.0 {
            return Err(TrainError::Argument(format!(
                "target out of domain at index {j}: {t}"
            )));
        }
    }
    let n = targets.len();
    let n0 = n - n1;
    if n0 == 0 || n1 == 0 {
        return Err(TrainError::Argument(format!(
            "auto class weights need both classes, got {n0} negatives and {n1} positives"
        )));
    }
    Ok((n as f64 / (2.0 * n0 as f64), n as f64 / (2.0 * n1 as f64)))
}
