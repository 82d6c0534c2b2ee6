//! Focal loss with its exact gradient with respect to the logits.

use super::ops::softmax_rows;
use super::{Matrix, NnError, Scalar};

/// Per-class alpha weights all equal to 1.
pub fn uniform_alpha(num_classes: usize) -> Vec<f64> {
    vec![1.0; num_classes]
}

/// FL = -alpha_t (1 - p_t)^gamma ln(p_t), averaged over the batch, with p_t
/// clamped at 1e-12 before the log. Returns the mean loss and the gradient
/// with respect to the logits (softmax included).
///
/// With gamma = 0 and alpha = 1 this is exactly cross-entropy.
pub fn focal_loss<S: Scalar>(
    logits: &Matrix<S>,
    targets: &[usize],
    gamma: f64,
    alpha: &[f64],
) -> Result<(S, Matrix<S>), NnError> {
    if targets.len() != logits.rows {
        return Err(NnError::ShapeError(format!(
            "focal loss: {} targets for {} rows",
            targets.len(),
            logits.rows
        )));
    }
    if alpha.len() != logits.cols {
        return Err(NnError::ShapeError(format!(
            "focal loss: {} alphas for {} classes",
            alpha.len(),
            logits.cols
        )));
    }
    let probs = softmax_rows(logits);
    let batch = logits.rows;
    let inv_batch = S::from_f64(1.0 / batch as f64);
    let gamma_s = S::from_f64(gamma);
    let clamp = S::from_f64(1e-12);

    let mut total = S::ZERO;
    let mut dlogits = Matrix::zeros(logits.rows, logits.cols);
    for b in 0..batch {
        let t = targets[b];
        if t >= logits.cols {
            return Err(NnError::ShapeError(format!("target {t} out of range")));
        }
        let a = S::from_f64(alpha[t]);
        let p_t = probs.at(b, t).maximum(clamp);
        let one_minus = S::ONE - p_t;
        let log_p = p_t.ln();
        total += -(a * one_minus.powf(gamma_s) * log_p);

        // d FL / d p_t, guarding the gamma = 0 and p_t = 1 corners
        let term1 = if gamma == 0.0 || one_minus <= S::ZERO {
            S::ZERO
        } else {
            a * gamma_s * one_minus.powf(gamma_s - S::ONE) * log_p
        };
        let term2 = a * one_minus.powf(gamma_s) / p_t;
        let fl_prime = term1 - term2;

        let row = dlogits.row_mut(b);
        for (k, r) in row.iter_mut().enumerate() {
            let delta = if k == t { S::ONE } else { S::ZERO };
            *r = fl_prime * p_t * (delta - probs.at(b, k)) * inv_batch;
        }
    }
    Ok((total * inv_batch, dlogits))
}
