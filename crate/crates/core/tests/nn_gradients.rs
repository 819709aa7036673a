//! Finite-difference checks for the dense stack and the LSTM cell.

use gan_stability::nn::{bce_loss, Activation, DenseLayer, LstmCell, Matrix, Network};
use gan_stability::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

const STEP: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    // absolute floor keeps near-zero gradients from exploding the ratio
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    let data = (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Scalar probe loss: sum of output * fixed weights.
fn probe_loss(net: &Network, x: &Matrix, probe: &Matrix) -> f64 {
    let y = net.predict(x).unwrap();
    y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

fn three_layer(seed: u64) -> Network {
    let spec = [
        (6, Activation::leaky_relu(0.2)),
        (5, Activation::Tanh),
        (2, Activation::Sigmoid),
    ];
    Network::glorot(4, &spec, &mut seeded_rng(seed)).unwrap()
}

fn check_network(net: &mut Network, x: &Matrix, probe: &Matrix) {
    net.forward(x).unwrap();
    let gin = net.backward(probe).unwrap();

    let analytic: Vec<(Vec<f64>, Vec<f64>)> = net
        .layers()
        .iter()
        .map(|l| (l.weight_grad().data().to_vec(), l.bias_grad().to_vec()))
        .collect();

    for (k, (wg, bg)) in analytic.iter().enumerate() {
        for i in 0..wg.len() {
            let orig = net.layers()[k].weights().data()[i];
            net.layers_mut()[k].weights_mut().data_mut()[i] = orig + STEP;
            let up = probe_loss(net, x, probe);
            net.layers_mut()[k].weights_mut().data_mut()[i] = orig - STEP;
            let dn = probe_loss(net, x, probe);
            net.layers_mut()[k].weights_mut().data_mut()[i] = orig;
            let fd = (up - dn) / (2.0 * STEP);
            assert!(rel_err(fd, wg[i]) < TOL, "layer {k} weight {i}: fd {fd} vs {}", wg[i]);
        }
        for i in 0..bg.len() {
            let orig = net.layers()[k].bias()[i];
            net.layers_mut()[k].bias_mut()[i] = orig + STEP;
            let up = probe_loss(net, x, probe);
            net.layers_mut()[k].bias_mut()[i] = orig - STEP;
            let dn = probe_loss(net, x, probe);
            net.layers_mut()[k].bias_mut()[i] = orig;
            let fd = (up - dn) / (2.0 * STEP);
            assert!(rel_err(fd, bg[i]) < TOL, "layer {k} bias {i}: fd {fd} vs {}", bg[i]);
        }
    }

    for i in 0..x.data().len() {
        let mut up = x.clone();
        up.data_mut()[i] += STEP;
        let mut dn = x.clone();
        dn.data_mut()[i] -= STEP;
        let fd = (probe_loss(net, &up, probe) - probe_loss(net, &dn, probe)) / (2.0 * STEP);
        assert!(
            rel_err(fd, gin.data()[i]) < TOL,
            "input {i}: fd {fd} vs {}",
            gin.data()[i]
        );
    }
}

#[test]
fn dense_parameter_and_input_gradients_match_finite_differences() {
    let mut net = three_layer(11);
    let x = random_matrix(3, 4, 12);
    let probe = random_matrix(3, 2, 13);
    check_network(&mut net, &x, &probe);
}

#[test]
fn input_gradient_only_matches_full_backward() {
    let mut net = three_layer(21);
    let x = random_matrix(5, 4, 22);
    let probe = random_matrix(5, 2, 23);
    net.forward(&x).unwrap();
    let full = net.backward(&probe).unwrap();
    net.forward(&x).unwrap();
    let only = net.input_gradient(&probe).unwrap();
    assert_eq!(full, only);
}

#[test]
fn bce_through_sigmoid_head_matches_finite_differences() {
    let spec = [(8, Activation::leaky_relu(0.2)), (1, Activation::Sigmoid)];
    let mut net = Network::glorot(3, &spec, &mut seeded_rng(5)).unwrap();
    let x = random_matrix(4, 3, 6);
    let targets = [1.0, 0.0, 1.0, 0.0];
    let loss_at = |net: &Network, x: &Matrix| bce_loss(&net.predict(x).unwrap(), &targets).unwrap().0;

    let out = net.forward(&x).unwrap().clone();
    let (_, g) = bce_loss(&out, &targets).unwrap();
    let gin = net.backward(&g).unwrap();
    for i in 0..x.data().len() {
        let mut up = x.clone();
        up.data_mut()[i] += STEP;
        let mut dn = x.clone();
        dn.data_mut()[i] -= STEP;
        let fd = (loss_at(&net, &up) - loss_at(&net, &dn)) / (2.0 * STEP);
        assert!(rel_err(fd, gin.data()[i]) < TOL);
    }
}

/// Straightforward re-implementation used as the forward oracle.
fn naive_forward(layers: &[DenseLayer], x: &Matrix) -> Vec<Vec<f64>> {
    let mut cur: Vec<Vec<f64>> = x.iter_rows().map(<[f64]>::to_vec).collect();
    for l in layers {
        let w = l.weights();
        cur = cur
            .iter()
            .map(|row| {
                (0..w.rows())
                    .map(|o| {
                        let mut z = l.bias()[o];
                        for i in 0..w.cols() {
                            z += w.get(o, i) * row[i];
                        }
                        match l.activation() {
                            Activation::LeakyRelu { slope } => {
                                if z > 0.0 {
                                    z
                                } else {
                                    slope * z
                                }
                            }
                            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                            Activation::Tanh => z.tanh(),
                            Activation::Linear => z,
                        }
                    })
                    .collect()
            })
            .collect();
    }
    cur
}

#[test]
fn two_layer_forward_matches_naive_oracle() {
    let spec = [(9, Activation::leaky_relu(0.2)), (3, Activation::Sigmoid)];
    let mut net = Network::glorot(5, &spec, &mut seeded_rng(77)).unwrap();
    let x = random_matrix(6, 5, 78);
    let expected = naive_forward(net.layers(), &x);
    let got = net.forward(&x).unwrap();
    for (r, row) in expected.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            assert!((got.get(r, c) - v).abs() < 1e-12);
        }
    }
}

fn lstm_loss(cell: &LstmCell, seq: &[Matrix], probes: &[Matrix]) -> f64 {
    cell.predict(seq)
        .unwrap()
        .iter()
        .zip(probes)
        .map(|(h, p)| h.data().iter().zip(p.data()).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

#[test]
fn lstm_gate_and_input_gradients_match_finite_differences() {
    let mut cell = LstmCell::glorot(3, 4, &mut seeded_rng(31)).unwrap();
    let seq: Vec<Matrix> = (0..3).map(|t| random_matrix(2, 3, 40 + t)).collect();
    let probes: Vec<Matrix> = (0..3).map(|t| random_matrix(2, 4, 50 + t)).collect();

    cell.forward(&seq).unwrap();
    let input_grads = cell.backward(&probes).unwrap();
    let grads: Vec<(Vec<f64>, Vec<f64>)> = cell
        .gate_grads()
        .map(|(w, b)| (w.data().to_vec(), b.to_vec()))
        .collect();

    for (k, (wg, bg)) in grads.iter().enumerate() {
        for i in 0..wg.len() {
            let orig = cell.gate_params().nth(k).unwrap().0.data()[i];
            cell.gate_params_mut().nth(k).unwrap().0.data_mut()[i] = orig + STEP;
            let up = lstm_loss(&cell, &seq, &probes);
            cell.gate_params_mut().nth(k).unwrap().0.data_mut()[i] = orig - STEP;
            let dn = lstm_loss(&cell, &seq, &probes);
            cell.gate_params_mut().nth(k).unwrap().0.data_mut()[i] = orig;
            let fd = (up - dn) / (2.0 * STEP);
            assert!(rel_err(fd, wg[i]) < TOL, "gate {k} weight {i}: {fd} vs {}", wg[i]);
        }
        for i in 0..bg.len() {
            let orig = cell.gate_params().nth(k).unwrap().1[i];
            cell.gate_params_mut().nth(k).unwrap().1[i] = orig + STEP;
            let up = lstm_loss(&cell, &seq, &probes);
            cell.gate_params_mut().nth(k).unwrap().1[i] = orig - STEP;
            let dn = lstm_loss(&cell, &seq, &probes);
            cell.gate_params_mut().nth(k).unwrap().1[i] = orig;
            let fd = (up - dn) / (2.0 * STEP);
            assert!(rel_err(fd, bg[i]) < TOL, "gate {k} bias {i}: {fd} vs {}", bg[i]);
        }
    }

    for t in 0..seq.len() {
        for i in 0..seq[t].data().len() {
            let mut up = seq.clone();
            up[t].data_mut()[i] += STEP;
            let mut dn = seq.clone();
            dn[t].data_mut()[i] -= STEP;
            let fd = (lstm_loss(&cell, &up, &probes) - lstm_loss(&cell, &dn, &probes)) / (2.0 * STEP);
            let a = input_grads[t].data()[i];
            assert!(rel_err(fd, a) < TOL, "step {t} input {i}: {fd} vs {a}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dense_gradients_hold_for_random_nets(seed in 0u64..10_000, rows in 1usize..4) {
        let mut net = three_layer(seed);
        let x = random_matrix(rows, 4, seed.wrapping_add(1));
        let probe = random_matrix(rows, 2, seed.wrapping_add(2));
        check_network(&mut net, &x, &probe);
    }

    #[test]
    fn forward_is_bitwise_deterministic(seed in 0u64..10_000) {
        let mut a = three_layer(seed);
        let mut b = three_layer(seed);
        let x = random_matrix(3, 4, seed ^ 0xabcd);
        prop_assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
    }

    #[test]
    fn bce_gradient_matches_loss_difference(
        probs in proptest::collection::vec(0.01f64..0.99, 1..8),
        bits in proptest::collection::vec(any::<bool>(), 8),
    ) {
        let n = probs.len();
        let targets: Vec<f64> = bits[..n].iter().map(|&b| f64::from(u8::from(b))).collect();
        let p = Matrix::from_vec(n, 1, probs.clone()).unwrap();
        let (_, g) = bce_loss(&p, &targets).unwrap();
        let h = 1e-7;
        for i in 0..n {
            let mut up = probs.clone();
            up[i] += h;
            let mut dn = probs.clone();
            dn[i] -= h;
            let lu = bce_loss(&Matrix::from_vec(n, 1, up).unwrap(), &targets).unwrap().0;
            let ld = bce_loss(&Matrix::from_vec(n, 1, dn).unwrap(), &targets).unwrap().0;
            let fd = (lu - ld) / (2.0 * h);
            prop_assert!((fd - g.data()[i]).abs() / fd.abs().max(1e-9) < 1e-6);
        }
    }
}
