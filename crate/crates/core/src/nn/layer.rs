use rand::Rng;

use super::matrix::{axpy, dot};
use super::{Activation, Matrix};
use crate::{Error, Result};

/// Fully connected layer `y = act(W x + b)` with `W` stored `[out x in]`.
///
/// Gradient buffers hold the gradient of the most recent backward pass; they
/// are overwritten, not accumulated.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    weights: Matrix,
    bias: Vec<f64>,
    activation: Activation,
    weight_grad: Matrix,
    bias_grad: Vec<f64>,
}

impl DenseLayer {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Argument(format!(
                "layer dimensions must be positive, got {in_dim}->{out_dim}"
            )));
        }
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data = (0..in_dim * out_dim).map(|_| rng.random_range(-limit..limit)).collect();
        Self::from_parts(Matrix::from_vec(out_dim, in_dim, data)?, vec![0.0; out_dim], activation)
    }

    pub fn from_parts(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape("DenseLayer::from_parts", weights.rows(), bias.len()));
        }
        let (out, inp) = weights.shape();
        Ok(Self {
            weights,
            bias,
            activation,
            weight_grad: Matrix::zeros(out, inp),
            bias_grad: vec![0.0; out],
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn weight_grad(&self) -> &Matrix {
        &self.weight_grad
    }

    pub fn bias_grad(&self) -> &[f64] {
        &self.bias_grad
    }

    /// Writes pre-activations and outputs for `input` into the given buffers.
    pub(crate) fn forward_into(&self, input: &Matrix, pre: &mut Matrix, out: &mut Matrix) {
        let n = input.rows();
        let out_dim = self.out_dim();
        if pre.shape() != (n, out_dim) {
            *pre = Matrix::zeros(n, out_dim);
        }
        if out.shape() != (n, out_dim) {
            *out = Matrix::zeros(n, out_dim);
        }
        for b in 0..n {
            let x = input.row(b);
            let z_row = pre.row_mut(b);
            for (o, z) in z_row.iter_mut().enumerate() {
                *z = dot(self.weights.row(o), x) + self.bias[o];
            }
            let act = self.activation;
            for (y, &z) in out.row_mut(b).iter_mut().zip(pre.row(b)) {
                *y = act.apply(z);
            }
        }
    }

    /// Back-propagates `grad_out` (gradient w.r.t. this layer's output).
    /// Parameter gradients are written only when `param_grads` is set.
    pub(crate) fn backward(
        &mut self,
        input: &Matrix,
        pre: &Matrix,
        out: &Matrix,
        grad_out: &Matrix,
        param_grads: bool,
    ) -> Matrix {
        let n = input.rows();
        let in_dim = self.in_dim();
        let out_dim = self.out_dim();
        if param_grads {
            self.weight_grad.data_mut().fill(0.0);
            self.bias_grad.fill(0.0);
        }
        let mut grad_in = Matrix::zeros(n, in_dim);
        let mut delta = vec![0.0; out_dim];
        for b in 0..n {
            for (o, d) in delta.iter_mut().enumerate() {
                *d = grad_out.get(b, o) * self.activation.derivative(pre.get(b, o), out.get(b, o));
            }
            let x = input.row(b);
            let gi = grad_in.row_mut(b);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                axpy(gi, d, self.weights.row(o));
                if param_grads {
                    axpy(self.weight_grad.row_mut(o), d, x);
                    self.bias_grad[o] += d;
                }
            }
        }
        grad_in
    }

    pub(crate) fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        f(self.weights.data_mut(), self.weight_grad.data());
        f(&mut self.bias, &self.bias_grad);
    }
}
