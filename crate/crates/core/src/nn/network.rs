use rand::Rng;

use super::{Activation, DenseLayer, Matrix, Parameterized};
use crate::{Error, Result};

/// A chain of dense layers.
///
/// `forward` caches every layer's input, pre-activation and output so a
/// following `backward` can run; `predict` is the read-only path.
#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<DenseLayer>,
    input_dim: usize,
    // acts[0] is the batch, acts[k + 1] the output of layer k
    acts: Vec<Matrix>,
    pres: Vec<Matrix>,
    cached: bool,
}

impl Network {
    /// Builds a Glorot-initialised network from `(width, activation)` specs.
    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, spec: &[(usize, Activation)], rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(spec.len());
        let mut prev = input_dim;
        for &(width, act) in spec {
            layers.push(DenseLayer::glorot(prev, width, act, rng)?);
            prev = width;
        }
        Self::from_layers(input_dim, layers)
    }

    pub fn from_layers(input_dim: usize, layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Argument("network needs at least one layer".into()));
        }
        let mut prev = input_dim;
        for (k, layer) in layers.iter().enumerate() {
            if layer.in_dim() != prev {
                return Err(Error::shape(
                    "Network::from_layers",
                    format!("layer {k} input {prev}"),
                    layer.in_dim(),
                ));
            }
            prev = layer.out_dim();
        }
        let depth = layers.len();
        Ok(Self {
            layers,
            input_dim,
            acts: vec![Matrix::zeros(0, 0); depth + 1],
            pres: vec![Matrix::zeros(0, 0); depth],
            cached: false,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, DenseLayer::out_dim)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.cached = false;
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.in_dim() * l.out_dim() + l.out_dim()).sum()
    }

    fn check_input(&self, op: &'static str, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim {
            return Err(Error::shape(op, format!("{} columns", self.input_dim), batch.cols()));
        }
        Ok(())
    }

    /// Runs the batch through every layer and caches intermediates for
    /// `backward`. Returns the network output.
    pub fn forward(&mut self, batch: &Matrix) -> Result<&Matrix> {
        self.check_input("Network::forward", batch)?;
        self.acts[0].clone_from(batch);
        for k in 0..self.layers.len() {
            let (head, tail) = self.acts.split_at_mut(k + 1);
            self.layers[k].forward_into(&head[k], &mut self.pres[k], &mut tail[0]);
        }
        self.cached = true;
        Ok(self.acts.last().expect("non-empty"))
    }

    /// Post-activation outputs of every layer from the last `forward`; the
    /// final entry is the network output.
    pub fn layer_outputs(&self) -> Result<&[Matrix]> {
        if !self.cached {
            return Err(Error::State("layer outputs requested before forward".into()));
        }
        Ok(&self.acts[1..])
    }

    /// Read-only inference; does not touch the backward cache.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input("Network::predict", batch)?;
        let mut cur = batch.clone();
        let mut pre = Matrix::zeros(0, 0);
        let mut out = Matrix::zeros(0, 0);
        for layer in &self.layers {
            layer.forward_into(&cur, &mut pre, &mut out);
            std::mem::swap(&mut cur, &mut out);
        }
        Ok(cur)
    }

    /// Back-propagates `upstream` (gradient of the loss w.r.t. the output of
    /// the last `forward`), fills every parameter gradient buffer and returns
    /// the gradient w.r.t. the input batch.
    pub fn backward(&mut self, upstream: &Matrix) -> Result<Matrix> {
        self.backprop(upstream, true)
    }

    /// Like [`Network::backward`] but leaves parameter gradients untouched.
    pub fn input_gradient(&mut self, upstream: &Matrix) -> Result<Matrix> {
        self.backprop(upstream, false)
    }

    fn backprop(&mut self, upstream: &Matrix, param_grads: bool) -> Result<Matrix> {
        if !self.cached {
            return Err(Error::State("backward called before forward".into()));
        }
        let out = self.acts.last().expect("non-empty");
        upstream.expect_shape("Network::backward", out.shape())?;
        let mut grad = upstream.clone();
        for k in (0..self.layers.len()).rev() {
            grad = self.layers[k].backward(&self.acts[k], &self.pres[k], &self.acts[k + 1], &grad, param_grads);
        }
        Ok(grad)
    }
}

impl Parameterized for Network {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        for layer in &mut self.layers {
            layer.visit_params(f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn identity_linear_layer() {
        let w = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let layer = DenseLayer::from_parts(w, vec![0.0, 0.0], Activation::Linear).unwrap();
        let mut net = Network::from_layers(2, vec![layer]).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_sigmoid_layer_outputs_half() {
        let layer = DenseLayer::from_parts(Matrix::zeros(3, 2), vec![0.0; 3], Activation::Sigmoid).unwrap();
        let net = Network::from_layers(2, vec![layer]).unwrap();
        let x = Matrix::from_rows(&[[5.0, -7.0], [0.1, 100.0]]).unwrap();
        assert!(net.predict(&x).unwrap().data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn linear_chain_rule_scalar() {
        let w = Matrix::from_rows(&[[-1.75]]).unwrap();
        let layer = DenseLayer::from_parts(w, vec![0.3], Activation::Linear).unwrap();
        let mut net = Network::from_layers(1, vec![layer]).unwrap();
        net.forward(&Matrix::from_rows(&[[2.0]]).unwrap()).unwrap();
        let gi = net.backward(&Matrix::from_rows(&[[1.0]]).unwrap()).unwrap();
        assert_eq!(gi.data(), &[-1.75]);
    }

    #[test]
    fn backward_before_forward_is_state_error() {
        let mut rng = seeded_rng(1);
        let mut net = Network::glorot(2, &[(1, Activation::Linear)], &mut rng).unwrap();
        let err = net.backward(&Matrix::zeros(1, 1)).unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let mut rng = seeded_rng(1);
        let mut net = Network::glorot(3, &[(2, Activation::Tanh)], &mut rng).unwrap();
        assert!(matches!(
            net.forward(&Matrix::zeros(1, 2)).unwrap_err(),
            Error::Shape { .. }
        ));
    }

    #[test]
    fn from_layers_rejects_broken_chain() {
        let mut rng = seeded_rng(3);
        let a = DenseLayer::glorot(4, 5, Activation::Tanh, &mut rng).unwrap();
        let b = DenseLayer::glorot(6, 1, Activation::Sigmoid, &mut rng).unwrap();
        assert!(Network::from_layers(4, vec![a, b]).is_err());
    }

    #[test]
    fn predict_matches_forward() {
        let mut rng = seeded_rng(9);
        let spec = [
            (7, Activation::leaky_relu(0.2)),
            (3, Activation::Tanh),
            (1, Activation::Sigmoid),
        ];
        let mut net = Network::glorot(4, &spec, &mut rng).unwrap();
        let x = Matrix::from_rows(&[[0.1, -0.2, 0.3, 0.9], [1.0, 2.0, -3.0, 0.0]]).unwrap();
        let p = net.predict(&x).unwrap();
        assert_eq!(net.forward(&x).unwrap(), &p);
        assert_eq!(net.layer_outputs().unwrap().len(), 3);
    }

    #[test]
    fn glorot_bounds_and_seed_reproducibility() {
        let spec = [(20, Activation::leaky_relu(0.2)), (1, Activation::Sigmoid)];
        let a = Network::glorot(12, &spec, &mut seeded_rng(5)).unwrap();
        let b = Network::glorot(12, &spec, &mut seeded_rng(5)).unwrap();
        let limit = (6.0f64 / 32.0).sqrt();
        for (la, lb) in a.layers().iter().zip(b.layers()) {
            assert_eq!(la.weights(), lb.weights());
        }
        assert!(a.layers()[0].weights().data().iter().all(|w| w.abs() <= limit));
    }
}
