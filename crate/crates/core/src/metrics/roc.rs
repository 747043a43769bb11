//! ROC curve and AUC.

use super::{check_pairs, MetricsError};

/// One ROC point per distinct score threshold, thresholds descending
/// from infinity. Trapezoidal AUC equals the Mann-Whitney statistic
/// (ties counted half).
#[derive(Debug, Clone)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    /// `threshold,fpr,tpr` rows for plotting.
    pub fn csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for ((t, f), p) in self.thresholds.iter().zip(&self.fpr).zip(&self.tpr) {
            out.push_str(&format!("{t},{f},{p}\n"));
        }
        out
    }
}

/// ROC over all distinct thresholds with the prediction rule
/// `positive iff p >= threshold`. Requires both classes.
pub fn roc(probs: &[f64], labels: &[f64]) -> Result<RocCurve, MetricsError> {
    check_pairs(probs, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::Undefined(format!(
            "ROC needs both classes, got {n_pos} positives and {n_neg} negatives"
        )));
    }

    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).expect("finite probabilities"));

    let mut thresholds = vec![f64::INFINITY];
    let mut fpr = vec![0.0];
    let mut tpr = vec![0.0];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let score = probs[order[i]];
        // Consume the whole tie group so each threshold appears once.
        while i < order.len() && probs[order[i]] == score {
            if labels[order[i]] == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let x = fp as f64 / n_neg as f64;
        let y = tp as f64 / n_pos as f64;
        auc += (x - fpr.last().unwrap()) * (y + tpr.last().unwrap()) / 2.0;
        thresholds.push(score);
        fpr.push(x);
        tpr.push(y);
    }
    Ok(RocCurve { thresholds, fpr, tpr, auc })
}
