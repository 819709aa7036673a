use crate::nn::Matrix;
use crate::{Error, Result};

/// Hinge repulsion between paired generated and stable rows:
/// `mean_i max(0, m - |x_i - s_i|)`.
///
/// The gradient w.r.t. `x_gen` is `-(x_i - s_i) / (|x_i - s_i| * b)` where the
/// hinge is active (`distance < m`) and zero otherwise. Coincident pairs get a
/// zero gradient.
pub fn repulsion_loss(x_gen: &Matrix, s_real: &Matrix, margin: f64) -> Result<(f64, Matrix)> {
    if x_gen.shape() != s_real.shape() {
        return Err(Error::shape(
            "repulsion_loss",
            format!("{}x{}", x_gen.rows(), x_gen.cols()),
            format!("{}x{}", s_real.rows(), s_real.cols()),
        ));
    }
    if !(margin > 0.0) {
        return Err(Error::Argument(format!("margin must be positive, got {margin}")));
    }
    let b = x_gen.rows();
    if b == 0 {
        return Err(Error::Argument("repulsion_loss on an empty batch".into()));
    }
    let inv_b = 1.0 / b as f64;
    let mut grad = Matrix::zeros(b, x_gen.cols());
    let mut loss = 0.0;
    for i in 0..b {
        let (x, s) = (x_gen.row(i), s_real.row(i));
        let dist = x.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist < margin {
            loss += margin - dist;
            if dist > 0.0 {
                let scale = -inv_b / dist;
                for ((g, &a), &c) in grad.row_mut(i).iter_mut().zip(x).zip(s) {
                    *g = scale * (a - c);
                }
            }
        }
    }
    Ok((loss * inv_b, grad))
}
