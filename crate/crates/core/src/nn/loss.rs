use super::Matrix;
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy of `[n x 1]` predictions against targets.
///
/// Returns the loss and its gradient with respect to the (clamped)
/// predictions.
pub fn bce_loss(predictions: &Matrix, targets: &[f64]) -> Result<(f64, Matrix)> {
    if predictions.cols() != 1 || predictions.rows() != targets.len() {
        return Err(Error::shape(
            "bce_loss",
            format!("{}x1", targets.len()),
            format!("{}x{}", predictions.rows(), predictions.cols()),
        ));
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::Argument("bce_loss on an empty batch".into()));
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = Matrix::zeros(n, 1);
    let mut loss = 0.0;
    for (i, (&p, &t)) in predictions.data().iter().zip(targets).enumerate() {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        grad.data_mut()[i] = (p - t) / (p * (1.0 - p)) * inv_n;
    }
    Ok((loss * inv_n, grad))
}
