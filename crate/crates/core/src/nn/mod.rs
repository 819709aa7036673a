//! Dense feed-forward networks, one LSTM cell, Adam and binary
//! cross-entropy. Everything is `f64` and single-threaded per network.

mod activation;
mod adam;
mod layer;
mod loss;
mod lstm;
mod matrix;
mod network;

pub use activation::{sigmoid, Activation};
pub use adam::{AdamConfig, AdamState, SliceParams};
pub use layer::DenseLayer;
pub use loss::{bce_loss, PROB_CLAMP};
pub use lstm::LstmCell;
pub use matrix::Matrix;
pub use network::Network;

/// Anything exposing `(parameters, gradients)` tensor pairs in a fixed order.
pub trait Parameterized {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64]));
}
