use rand::Rng;

use super::activation::sigmoid;
use super::matrix::{axpy, dot};
use super::{Matrix, Parameterized};
use crate::{Error, Result};

const INPUT: usize = 0;
const FORGET: usize = 1;
const OUTPUT: usize = 2;
const CANDIDATE: usize = 3;

#[derive(Debug, Clone)]
struct Gate {
    // [hidden x (input + hidden)], columns ordered input-then-hidden
    weights: Matrix,
    bias: Vec<f64>,
    weight_grad: Matrix,
    bias_grad: Vec<f64>,
}

impl Gate {
    fn new(weights: Matrix, bias: Vec<f64>) -> Self {
        let (r, c) = weights.shape();
        let n = bias.len();
        Self {
            weights,
            bias,
            weight_grad: Matrix::zeros(r, c),
            bias_grad: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone)]
struct Step {
    xh: Matrix,
    gates: [Matrix; 4],
    c_prev: Matrix,
    tanh_c: Matrix,
}

/// Standard LSTM cell (input, forget, output and candidate gates) unrolled
/// over a sequence, with zero initial hidden and cell state.
#[derive(Debug, Clone)]
pub struct LstmCell {
    input_dim: usize,
    hidden_dim: usize,
    gates: [Gate; 4],
    cache: Vec<Step>,
}

impl LstmCell {
    /// Glorot-uniform gate weights; forget-gate bias starts at 1.
    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::Argument("LSTM dimensions must be positive".into()));
        }
        let cols = input_dim + hidden_dim;
        let limit = (6.0 / (cols + hidden_dim) as f64).sqrt();
        let mut make = |bias: f64| {
            let data = (0..hidden_dim * cols)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            Gate::new(
                Matrix::from_vec(hidden_dim, cols, data).expect("sized"),
                vec![bias; hidden_dim],
            )
        };
        let gates = [make(0.0), make(1.0), make(0.0), make(0.0)];
        Ok(Self {
            input_dim,
            hidden_dim,
            gates,
            cache: Vec::new(),
        })
    }

    /// Cell with every weight and bias zero.
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let cols = input_dim + hidden_dim;
        let gate = || Gate::new(Matrix::zeros(hidden_dim, cols), vec![0.0; hidden_dim]);
        Self {
            input_dim,
            hidden_dim,
            gates: [gate(), gate(), gate(), gate()],
            cache: Vec::new(),
        }
    }

    /// Rebuilds a cell from gate tensors in input/forget/output/candidate
    /// order.
    pub fn from_parts(input_dim: usize, hidden_dim: usize, parts: Vec<(Matrix, Vec<f64>)>) -> Result<Self> {
        if parts.len() != 4 {
            return Err(Error::shape("LstmCell::from_parts", 4, parts.len()));
        }
        let mut gates = Vec::with_capacity(4);
        for (w, b) in parts {
            w.expect_shape("LstmCell::from_parts", (hidden_dim, input_dim + hidden_dim))?;
            if b.len() != hidden_dim {
                return Err(Error::shape("LstmCell::from_parts", hidden_dim, b.len()));
            }
            gates.push(Gate::new(w, b));
        }
        let gates: [Gate; 4] = gates.try_into().expect("four gates");
        Ok(Self {
            input_dim,
            hidden_dim,
            gates,
            cache: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// Gate tensors in input/forget/output/candidate order.
    pub fn gate_params(&self) -> impl Iterator<Item = (&Matrix, &[f64])> {
        self.gates.iter().map(|g| (&g.weights, g.bias.as_slice()))
    }

    /// Mutable gate tensors, same order as [`LstmCell::gate_params`].
    pub fn gate_params_mut(&mut self) -> impl Iterator<Item = (&mut Matrix, &mut Vec<f64>)> {
        self.cache.clear();
        self.gates.iter_mut().map(|g| (&mut g.weights, &mut g.bias))
    }

    pub fn gate_grads(&self) -> impl Iterator<Item = (&Matrix, &[f64])> {
        self.gates.iter().map(|g| (&g.weight_grad, g.bias_grad.as_slice()))
    }

    /// Runs the sequence (each step `[batch x input_dim]`) and returns the
    /// hidden state after every step. Intermediates are cached for
    /// `backward` only when `cache` is set.
    fn run(&mut self, sequence: &[Matrix], cache: bool) -> Result<Vec<Matrix>> {
        let Some(first) = sequence.first() else {
            return Err(Error::Argument("empty sequence".into()));
        };
        let batch = first.rows();
        for (t, x) in sequence.iter().enumerate() {
            if x.shape() != (batch, self.input_dim) {
                return Err(Error::shape(
                    "LstmCell::forward",
                    format!("step {t}: {batch}x{}", self.input_dim),
                    format!("{}x{}", x.rows(), x.cols()),
                ));
            }
        }
        let (i_dim, h_dim) = (self.input_dim, self.hidden_dim);
        let mut h = Matrix::zeros(batch, h_dim);
        let mut c = Matrix::zeros(batch, h_dim);
        let mut hidden = Vec::with_capacity(sequence.len());
        self.cache.clear();
        for x in sequence {
            let mut xh = Matrix::zeros(batch, i_dim + h_dim);
            for b in 0..batch {
                let row = xh.row_mut(b);
                row[..i_dim].copy_from_slice(x.row(b));
                row[i_dim..].copy_from_slice(h.row(b));
            }
            let mut acts: [Matrix; 4] = std::array::from_fn(|_| Matrix::zeros(batch, h_dim));
            for (k, gate) in self.gates.iter().enumerate() {
                for b in 0..batch {
                    let inp = xh.row(b);
                    let dst = acts[k].row_mut(b);
                    for (j, d) in dst.iter_mut().enumerate() {
                        let z = dot(gate.weights.row(j), inp) + gate.bias[j];
                        *d = if k == CANDIDATE { z.tanh() } else { sigmoid(z) };
                    }
                }
            }
            let c_prev = c.clone();
            let mut tanh_c = Matrix::zeros(batch, h_dim);
            for idx in 0..batch * h_dim {
                let cv = acts[FORGET].data()[idx] * c_prev.data()[idx]
                    + acts[INPUT].data()[idx] * acts[CANDIDATE].data()[idx];
                c.data_mut()[idx] = cv;
                let tc = cv.tanh();
                tanh_c.data_mut()[idx] = tc;
                h.data_mut()[idx] = acts[OUTPUT].data()[idx] * tc;
            }
            hidden.push(h.clone());
            if cache {
                self.cache.push(Step {
                    xh,
                    gates: acts,
                    c_prev,
                    tanh_c,
                });
            }
        }
        Ok(hidden)
    }

    pub fn forward(&mut self, sequence: &[Matrix]) -> Result<Vec<Matrix>> {
        self.run(sequence, true)
    }

    /// Inference without caching.
    pub fn predict(&self, sequence: &[Matrix]) -> Result<Vec<Matrix>> {
        // the scratch cell holds no cache, so cloning is just the parameters
        let mut scratch = Self {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            gates: self.gates.clone(),
            cache: Vec::new(),
        };
        scratch.run(sequence, false)
    }

    /// Back-propagation through time. `hidden_grads[t]` is the loss gradient
    /// w.r.t. the hidden state after step `t` (zeros where the loss does not
    /// read that step). Fills gate gradients and returns per-step input
    /// gradients.
    pub fn backward(&mut self, hidden_grads: &[Matrix]) -> Result<Vec<Matrix>> {
        if self.cache.is_empty() {
            return Err(Error::State("LSTM backward called before forward".into()));
        }
        if hidden_grads.len() != self.cache.len() {
            return Err(Error::shape("LstmCell::backward", self.cache.len(), hidden_grads.len()));
        }
        let batch = self.cache[0].xh.rows();
        let (i_dim, h_dim) = (self.input_dim, self.hidden_dim);
        for g in hidden_grads {
            g.expect_shape("LstmCell::backward", (batch, h_dim))?;
        }
        for gate in &mut self.gates {
            gate.weight_grad.data_mut().fill(0.0);
            gate.bias_grad.fill(0.0);
        }

        let mut dh_next = Matrix::zeros(batch, h_dim);
        let mut dc_next = Matrix::zeros(batch, h_dim);
        let mut input_grads = vec![Matrix::zeros(batch, i_dim); self.cache.len()];
        let mut da: [Matrix; 4] = std::array::from_fn(|_| Matrix::zeros(batch, h_dim));
        for t in (0..self.cache.len()).rev() {
            let step = &self.cache[t];
            let [ig, fg, og, cg] = &step.gates;
            for idx in 0..batch * h_dim {
                let dh = hidden_grads[t].data()[idx] + dh_next.data()[idx];
                let (i, f, o, g) = (ig.data()[idx], fg.data()[idx], og.data()[idx], cg.data()[idx]);
                let tc = step.tanh_c.data()[idx];
                let dc = dh * o * (1.0 - tc * tc) + dc_next.data()[idx];
                da[INPUT].data_mut()[idx] = dc * g * i * (1.0 - i);
                da[FORGET].data_mut()[idx] = dc * step.c_prev.data()[idx] * f * (1.0 - f);
                da[OUTPUT].data_mut()[idx] = dh * tc * o * (1.0 - o);
                da[CANDIDATE].data_mut()[idx] = dc * i * (1.0 - g * g);
                dc_next.data_mut()[idx] = dc * f;
            }
            let mut dxh = Matrix::zeros(batch, i_dim + h_dim);
            for (k, gate) in self.gates.iter_mut().enumerate() {
                for b in 0..batch {
                    let inp = step.xh.row(b);
                    for j in 0..h_dim {
                        let d = da[k].get(b, j);
                        if d == 0.0 {
                            continue;
                        }
                        axpy(gate.weight_grad.row_mut(j), d, inp);
                        gate.bias_grad[j] += d;
                        axpy(dxh.row_mut(b), d, gate.weights.row(j));
                    }
                }
            }
            for b in 0..batch {
                let row = dxh.row(b);
                input_grads[t].row_mut(b).copy_from_slice(&row[..i_dim]);
                dh_next.row_mut(b).copy_from_slice(&row[i_dim..]);
            }
        }
        Ok(input_grads)
    }
}

impl Parameterized for LstmCell {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        for gate in &mut self.gates {
            f(gate.weights.data_mut(), gate.weight_grad.data());
            f(&mut gate.bias, &gate.bias_grad);
        }
    }
}
