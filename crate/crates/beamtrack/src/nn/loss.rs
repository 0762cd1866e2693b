//! Softmax scores and step-averaged cross-entropy.

use super::NnError;

/// Floor applied inside the loss log to avoid infinities on saturated scores.
pub const LOG_EPSILON: f64 = 1e-12;

/// Numerically stable softmax (max subtraction), so a uniform shift of the
/// logits leaves the output unchanged.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean over steps of `-ln(scores[step][target])`, with scores floored at
/// [`LOG_EPSILON`].
pub fn cross_entropy(score_seq: &[Vec<f64>], targets: &[usize]) -> Result<f64, NnError> {
    if score_seq.len() != targets.len() {
        return Err(NnError::ShapeMismatch {
            context: "cross_entropy",
            expected: vec![score_seq.len()],
            found: vec![targets.len()],
        });
    }
    if score_seq.is_empty() {
        return Err(NnError::EmptyInput {
            context: "cross_entropy",
        });
    }
    let mut total = 0.0;
    for (scores, &t) in score_seq.iter().zip(targets) {
        if t >= scores.len() {
            return Err(NnError::IndexOutOfRange {
                context: "cross_entropy",
                index: t,
                len: scores.len(),
            });
        }
        total -= scores[t].max(LOG_EPSILON).ln();
    }
    Ok(total / score_seq.len() as f64)
}

/// Gradient of `cross_entropy` with respect to the raw scores.
pub fn cross_entropy_backward(score_seq: &[Vec<f64>], targets: &[usize]) -> Vec<Vec<f64>> {
    let steps = score_seq.len() as f64;
    score_seq
        .iter()
        .zip(targets)
        .map(|(scores, &t)| {
            let mut d = vec![0.0; scores.len()];
            d[t] = -1.0 / (scores[t].max(LOG_EPSILON) * steps);
            d
        })
        .collect()
}

/// Gradient of `cross_entropy(softmax(logits))` with respect to the logits of
/// one step: `(probs - onehot) / num_steps`. The fused form is exact and
/// avoids the softmax Jacobian.
pub fn softmax_cross_entropy_grad(probs: &[f64], target: usize, num_steps: usize) -> Vec<f64> {
    let scale = 1.0 / num_steps as f64;
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| (p - if i == target { 1.0 } else { 0.0 }) * scale)
        .collect()
}
