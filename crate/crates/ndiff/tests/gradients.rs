//! Analytic gradients against central finite differences, and forward
//! passes against naive loop oracles.

use ndiff::{sigmoid, Graph, LayerSpec, LstmParams, Mode, Sequential, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
const SEEDS: u64 = 20;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Projects an arbitrary output onto a scalar with fixed random weights so
/// every output element contributes a distinct gradient.
fn project(g: &mut Graph, out: Var, rng_seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0xabcdef);
    let shape = g.value(out).shape().to_vec();
    let w = rand_tensor(&mut rng, &shape);
    let wv = g.constant(w);
    let p = g.mul(out, wv).unwrap();
    g.sum(p).unwrap()
}

/// Relative error between analytic and numeric gradients, per input tensor,
/// measured in the L2 norm.
fn check<F>(inputs: Vec<Tensor>, seed: u64, build: F)
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let eval = |ts: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vs: Vec<Var> = ts.iter().map(|t| g.param(t.clone())).collect();
        let out = build(&mut g, &vs);
        let loss = project(&mut g, out, seed);
        g.value(loss).data()[0]
    };
    let mut g = Graph::new();
    let vs: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = build(&mut g, &vs);
    let loss = project(&mut g, out, seed);
    g.backward(loss).unwrap();
    for (k, v) in vs.iter().enumerate() {
        let analytic = g.grad(*v).cloned().unwrap_or_else(|| Tensor::zeros(inputs[k].shape()));
        let mut numeric = vec![0.0; inputs[k].len()];
        for j in 0..inputs[k].len() {
            let mut plus = inputs.clone();
            plus[k].data_mut()[j] += STEP;
            let mut minus = inputs.clone();
            minus[k].data_mut()[j] -= STEP;
            numeric[j] = (eval(&plus) - eval(&minus)) / (2.0 * STEP);
        }
        let diff: f64 = analytic
            .data()
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let na = analytic.data().iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = diff / na.max(nn).max(1e-6);
        assert!(
            rel <= REL_TOL,
            "seed {seed} input {k}: relative error {rel:e}\nanalytic {:?}\nnumeric {:?}",
            analytic.data(),
            numeric
        );
    }
}

fn for_seeds(mut f: impl FnMut(u64, &mut ChaCha8Rng)) {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        f(seed, &mut rng);
    }
}

#[test]
fn grad_dense() {
    for_seeds(|seed, rng| {
        let (n, q, p) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5));
        let ins = vec![rand_tensor(rng, &[n, q]), rand_tensor(rng, &[q, p]), rand_tensor(rng, &[p])];
        check(ins, seed, |g, v| g.dense(v[0], v[1], v[2]).unwrap());
    });
}

#[test]
fn grad_elementwise_activations() {
    for_seeds(|seed, rng| {
        let shape = [rng.random_range(1..4), rng.random_range(1..5)];
        let x = rand_tensor(rng, &shape);
        check(vec![x.clone()], seed, |g, v| g.relu(v[0]).unwrap());
        check(vec![x.clone()], seed, |g, v| g.leaky_relu(v[0], 0.2).unwrap());
        check(vec![x.clone()], seed, |g, v| g.sigmoid(v[0]).unwrap());
        check(vec![x.clone()], seed, |g, v| g.tanh(v[0]).unwrap());
        check(vec![x.clone()], seed, |g, v| g.softmax(v[0]).unwrap());
        let pos = x.map(|a| a.abs() + 0.5);
        check(vec![pos], seed, |g, v| g.sqrt(v[0]).unwrap());
    });
}

#[test]
fn grad_structural_ops() {
    for_seeds(|seed, rng| {
        let (n, a, b) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4));
        let x = rand_tensor(rng, &[n, a]);
        let y = rand_tensor(rng, &[n, b]);
        check(vec![x.clone(), y.clone()], seed, |g, v| {
            let c = g.concat_cols(&[v[0], v[1]]).unwrap();
            g.slice_cols(c, 1, a + b - 1).unwrap()
        });
        check(vec![x.clone()], seed, |g, v| g.sum_cols(v[0]).unwrap());
        check(vec![x.clone()], seed, |g, v| g.transpose(v[0]).unwrap());
        check(vec![x.clone()], seed, |g, v| g.mean(v[0]).unwrap());
        let z = rand_tensor(rng, &[n, a]);
        check(vec![x.clone(), z.clone()], seed, |g, v| {
            let m = g.mul(v[0], v[1]).unwrap();
            let s = g.sub(m, v[1]).unwrap();
            let s = g.scale(s, -1.7).unwrap();
            g.add_scalar(s, 0.3).unwrap()
        });
        let seq = rand_tensor(rng, &[n, 3, a]);
        check(vec![seq], seed, |g, v| {
            let s0 = g.time_step(v[0], 0).unwrap();
            let s2 = g.time_step(v[0], 2).unwrap();
            let st = g.stack_time(&[s2, s0, s2]).unwrap();
            g.reshape(st, vec![n, 3 * a]).unwrap()
        });
    });
}

#[test]
fn grad_batch_norm() {
    for_seeds(|seed, rng| {
        let (n, c) = (rng.random_range(2..6), rng.random_range(1..4));
        let ins = vec![rand_tensor(rng, &[n, c]), rand_tensor(rng, &[c]), rand_tensor(rng, &[c])];
        check(ins, seed, |g, v| g.batch_norm(v[0], v[1], v[2], 1e-5).unwrap());
    });
}

#[test]
fn grad_conv1d_and_maxpool() {
    for_seeds(|seed, rng| {
        let (n, t, c) = (rng.random_range(1..3), rng.random_range(3..9), rng.random_range(1..3));
        let (f, k) = (rng.random_range(1..4), rng.random_range(1..4));
        let ins = vec![rand_tensor(rng, &[n, t, c]), rand_tensor(rng, &[f, k, c]), rand_tensor(rng, &[f])];
        check(ins.clone(), seed, |g, v| g.conv1d(v[0], v[1], v[2]).unwrap());
        check(vec![ins[0].clone()], seed, |g, v| g.maxpool1d(v[0], 2).unwrap());
    });
}

#[test]
fn grad_lstm_step_and_layer() {
    for_seeds(|seed, rng| {
        let (n, c, h) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4));
        let ins = vec![
            rand_tensor(rng, &[n, c]),
            rand_tensor(rng, &[n, h]),
            rand_tensor(rng, &[n, h]),
            rand_tensor(rng, &[h + c, 4 * h]),
            rand_tensor(rng, &[4 * h]),
        ];
        check(ins, seed, |g, v| {
            let p = LstmParams { weights: v[3], bias: v[4] };
            let (ht, ct) = g.lstm_step(v[0], v[1], v[2], &p).unwrap();
            g.concat_cols(&[ht, ct]).unwrap()
        });
    });
}

#[test]
fn grad_cross_entropy() {
    for_seeds(|seed, rng| {
        let (n, c) = (rng.random_range(1..5), rng.random_range(2..6));
        let logits = rand_tensor(rng, &[n, c]);
        let mut targets = Tensor::zeros(&[n, c]);
        for r in 0..n {
            let k = rng.random_range(0..c);
            targets.data_mut()[r * c + k] = 1.0;
        }
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let t2 = targets.clone();
        check(vec![logits.clone()], seed, move |g, v| g.softmax_cross_entropy(v[0], &t2).unwrap());
        check(vec![logits], seed, move |g, v| {
            g.weighted_softmax_cross_entropy(v[0], &targets, &weights, 3.0).unwrap()
        });
    });
}

#[test]
fn grad_through_sequential_stacks() {
    for_seeds(|seed, rng| {
        let layers = vec![
            LayerSpec::Conv1d { filters: 2, kernel: 2 },
            LayerSpec::Relu,
            LayerSpec::MaxPool1d { pool: 2 },
            LayerSpec::Lstm { units: 2, return_sequences: true },
            LayerSpec::Lstm { units: 2, return_sequences: false },
            LayerSpec::Dense { units: 3 },
            LayerSpec::BatchNorm,
            LayerSpec::Tanh,
        ];
        let model = Sequential::new(&[5, 1], layers, rng).unwrap();
        let x = rand_tensor(rng, &[3, 5, 1]);
        let loss_of = |m: &Sequential, g: &mut Graph| {
            let xv = g.param(x.clone());
            let fwd = m.forward(g, xv, Mode::Train).unwrap();
            let l = project(g, fwd.output, seed);
            (l, fwd.param_vars)
        };
        let mut g = Graph::new();
        let (l, pvars) = loss_of(&model, &mut g);
        g.backward(l).unwrap();
        let flat: Vec<Tensor> = model.params().iter().flatten().cloned().collect();
        for (k, pv) in pvars.iter().enumerate() {
            let analytic = g.grad(*pv).unwrap().clone();
            let mut numeric = vec![0.0; flat[k].len()];
            for j in 0..flat[k].len() {
                let eval = |delta: f64| {
                    let mut m = model.clone();
                    m.flat_params_mut()[k].data_mut()[j] += delta;
                    let mut g = Graph::new();
                    let (l, _) = loss_of(&m, &mut g);
                    g.value(l).data()[0]
                };
                numeric[j] = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
            }
            let diff: f64 = analytic.data().iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
            let scale = numeric.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-6);
            assert!(diff / scale <= REL_TOL, "seed {seed} param {k}: {:e}", diff / scale);
        }
    });
}

#[test]
fn zero_gradient_for_unused_parameter() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]));
    let unused = g.param(Tensor::vector(vec![3.0]));
    let s = g.sum(x).unwrap();
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[1.0, 1.0]);
    assert!(g.grad(unused).map_or(true, |t| t.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn linear_loss_gradient_is_input_structure() {
    // L = Σ (x · W): dL/dW[i][j] = Σ_n x[n][i]
    let mut g = Graph::new();
    let x = g.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap());
    let w = g.param(Tensor::from_rows(&[vec![0.5, 0.1, 0.0], vec![-0.2, 0.3, 1.0]]).unwrap());
    let y = g.matmul(x, w).unwrap();
    let l = g.sum(y).unwrap();
    g.backward(l).unwrap();
    assert_eq!(g.grad(w).unwrap().data(), &[4.0, 4.0, 4.0, 1.0, 1.0, 1.0]);
}

#[test]
fn backward_on_foreign_or_reset_tape_is_state_error() {
    let mut g = Graph::new();
    let x = g.param(Tensor::scalar(1.0));
    let other = Graph::new();
    let mut other = other;
    assert!(matches!(other.backward(x), Err(ndiff::NdError::State(_))));
    g.reset();
    assert!(matches!(g.backward(x), Err(ndiff::NdError::State(_))));
}

// ---------------------------------------------------------------- oracles

fn conv_oracle(x: &Tensor, k: &Tensor, b: &Tensor) -> Vec<f64> {
    let (n, t, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (f, kk) = (k.shape()[0], k.shape()[1]);
    let tout = t - kk + 1;
    let mut out = Vec::new();
    for bi in 0..n {
        for s in 0..tout {
            for fi in 0..f {
                let mut acc = b.data()[fi];
                for j in 0..kk {
                    for ch in 0..c {
                        acc += x.data()[(bi * t + s + j) * c + ch] * k.data()[(fi * kk + j) * c + ch];
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

#[test]
fn conv1d_examples_and_loop_oracle() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::new(vec![1, 3, 1], vec![1.0, 2.0, 3.0]).unwrap());
    let k = g.constant(Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap());
    let b = g.constant(Tensor::vector(vec![0.0]));
    let y = g.conv1d(x, k, b).unwrap();
    assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0]);

    let x = g.constant(Tensor::new(vec![1, 4, 1], vec![1.0; 4]).unwrap());
    let k = g.constant(Tensor::new(vec![1, 3, 1], vec![1.0; 3]).unwrap());
    let y = g.conv1d(x, k, b).unwrap();
    assert_eq!(g.value(y).data(), &[3.0, 3.0]);

    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let xt = rand_tensor(&mut rng, &[2, 8, 2]);
        let kt = rand_tensor(&mut rng, &[3, 3, 2]);
        let bt = rand_tensor(&mut rng, &[3]);
        let want = conv_oracle(&xt, &kt, &bt);
        let mut g = Graph::new();
        let (x, k, b) = (g.constant(xt), g.constant(kt), g.constant(bt));
        let y = g.conv1d(x, k, b).unwrap();
        for (a, w) in g.value(y).data().iter().zip(&want) {
            assert!((a - w).abs() <= 1e-12);
        }
    }

    let mut g = Graph::new();
    let x = g.constant(Tensor::zeros(&[1, 2, 1]));
    let k = g.constant(Tensor::zeros(&[1, 3, 1]));
    let b = g.constant(Tensor::zeros(&[1]));
    assert!(g.conv1d(x, k, b).is_err());
}

#[test]
fn maxpool_examples_and_loop_oracle() {
    let pool = |v: Vec<f64>| {
        let mut g = Graph::new();
        let n = v.len();
        let x = g.param(Tensor::new(vec![1, n, 1], v).unwrap());
        let y = g.maxpool1d(x, 2).unwrap();
        let out = g.value(y).data().to_vec();
        let s = g.sum(y).unwrap();
        g.backward(s).unwrap();
        (out, g.grad(x).unwrap().data().to_vec())
    };
    assert_eq!(pool(vec![1.0, 3.0, 2.0, 5.0]).0, vec![3.0, 5.0]);
    assert_eq!(pool(vec![7.0]).0, vec![7.0]);
    let (out, grad) = pool(vec![2.0; 4]);
    assert_eq!(out, vec![2.0, 2.0]);
    // ties route to the first index of each window
    assert_eq!(grad, vec![1.0, 0.0, 1.0, 0.0]);

    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let t = rng.random_range(2..12);
        let xt = rand_tensor(&mut rng, &[2, t, 3]);
        let mut g = Graph::new();
        let x = g.constant(xt.clone());
        let y = g.maxpool1d(x, 2).unwrap();
        let got = g.value(y);
        for b in 0..2 {
            for w in 0..t / 2 {
                for c in 0..3 {
                    let a = xt.data()[(b * t + 2 * w) * 3 + c];
                    let bb = xt.data()[(b * t + 2 * w + 1) * 3 + c];
                    let want = a.max(bb);
                    assert!((got.data()[(b * (t / 2) + w) * 3 + c] - want).abs() <= 1e-12);
                }
            }
        }
    }
}

/// Scalar re-implementation of one LSTM step: gates from `[h_prev, x_t]`.
fn lstm_oracle(
    x: &[f64],
    h: &[f64],
    c: &[f64],
    w: &Tensor,
    b: &[f64],
    units: usize,
) -> (Vec<f64>, Vec<f64>) {
    let joined: Vec<f64> = h.iter().chain(x).copied().collect();
    let gate = |block: usize, j: usize| -> f64 {
        let col = block * units + j;
        let mut acc = b[col];
        for (r, v) in joined.iter().enumerate() {
            acc += v * w.get2(r, col);
        }
        acc
    };
    let mut h_out = vec![0.0; units];
    let mut c_out = vec![0.0; units];
    for j in 0..units {
        let i = sigmoid(gate(0, j));
        let f = sigmoid(gate(1, j));
        let o = sigmoid(gate(2, j));
        let cand = gate(3, j).tanh();
        c_out[j] = f * c[j] + i * cand;
        h_out[j] = o * c_out[j].tanh();
    }
    (h_out, c_out)
}

#[test]
fn lstm_step_examples_and_scalar_oracle() {
    let (n, cin, h) = (2, 3, 2);
    let mut g = Graph::new();
    let x = g.constant(Tensor::filled(&[n, cin], 0.7));
    let hp = g.constant(Tensor::filled(&[n, h], -0.3));
    let cp = g.constant(Tensor::from_rows(&[vec![1.0, -2.0], vec![0.5, 4.0]]).unwrap());
    let w = g.constant(Tensor::zeros(&[h + cin, 4 * h]));
    let b = g.constant(Tensor::zeros(&[4 * h]));
    let (_, c) = g.lstm_step(x, hp, cp, &LstmParams { weights: w, bias: b }).unwrap();
    assert_eq!(g.value(c).data(), &[0.5, -1.0, 0.25, 2.0]);

    // forget gate saturated open, input gate shut: memory carries over
    let mut bias = vec![0.0; 4 * h];
    bias[..h].iter_mut().for_each(|v| *v = -1e3);
    bias[h..2 * h].iter_mut().for_each(|v| *v = 1e3);
    let b = g.constant(Tensor::vector(bias));
    let (_, c) = g.lstm_step(x, hp, cp, &LstmParams { weights: w, bias: b }).unwrap();
    assert_eq!(g.value(c).data(), &[1.0, -2.0, 0.5, 4.0]);

    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let xt = rand_tensor(&mut rng, &[n, cin]);
        let ht = rand_tensor(&mut rng, &[n, h]);
        let ct = rand_tensor(&mut rng, &[n, h]);
        let wt = rand_tensor(&mut rng, &[h + cin, 4 * h]);
        let bt = rand_tensor(&mut rng, &[4 * h]);
        let mut g = Graph::new();
        let vars = (
            g.constant(xt.clone()),
            g.constant(ht.clone()),
            g.constant(ct.clone()),
            g.constant(wt.clone()),
            g.constant(bt.clone()),
        );
        let p = LstmParams { weights: vars.3, bias: vars.4 };
        let (hv, cv) = g.lstm_step(vars.0, vars.1, vars.2, &p).unwrap();
        for r in 0..n {
            let (ho, co) = lstm_oracle(xt.row(r), ht.row(r), ct.row(r), &wt, bt.data(), h);
            for j in 0..h {
                assert!((g.value(hv).row(r)[j] - ho[j]).abs() <= 1e-12);
                assert!((g.value(cv).row(r)[j] - co[j]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn dense_examples() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap());
    let w = g.constant(Tensor::from_rows(&[vec![1.0], vec![1.0]]).unwrap());
    let b = g.constant(Tensor::vector(vec![0.0]));
    let y = g.dense(x, w, b).unwrap();
    assert_eq!(g.value(y).data(), &[3.0]);

    let xt = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let wt = Tensor::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
    let bt = Tensor::vector(vec![1.0, 1.0]);
    // brute-force loop oracle
    let mut want = vec![0.0; 4];
    for i in 0..2 {
        for j in 0..2 {
            want[i * 2 + j] = bt.data()[j] + (0..2).map(|k| xt.get2(i, k) * wt.get2(k, j)).sum::<f64>();
        }
    }
    assert_eq!(want, vec![3.0, 1.0, 1.0, 4.0]);
    let (x, w, b) = (g.constant(xt.clone()), g.constant(wt), g.constant(bt));
    let y = g.dense(x, w, b).unwrap();
    assert_eq!(g.value(y).data(), &want[..]);

    let eye = g.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
    let zero = g.constant(Tensor::zeros(&[2]));
    let x2 = g.constant(Tensor::from_rows(&[vec![0.3, -4.0]]).unwrap());
    let y = g.dense(x2, eye, zero).unwrap();
    assert_eq!(g.value(y).data(), &[0.3, -4.0]);

    let bad = g.constant(Tensor::zeros(&[3, 1]));
    assert!(g.dense(x2, bad, zero).is_err());
}

#[test]
fn activation_examples() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(vec![-1.0, 2.0]));
    let r = g.relu(x).unwrap();
    assert_eq!(g.value(r).data(), &[0.0, 2.0]);
    let z = g.constant(Tensor::from_rows(&[vec![0.0, 0.0]]).unwrap());
    let s = g.softmax(z).unwrap();
    assert_eq!(g.value(s).data(), &[0.5, 0.5]);
    let z = g.constant(Tensor::scalar(0.0));
    let s = g.sigmoid(z).unwrap();
    assert_eq!(g.value(s).data(), &[0.5]);
}

#[test]
fn softmax_rows_are_distributions() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let x = rand_tensor(&mut rng, &[4, 6]).map(|v| v * 30.0);
        let mut g = Graph::new();
        let xv = g.constant(x);
        let s = g.softmax(xv).unwrap();
        for r in 0..4 {
            let row = g.value(s).row(r);
            assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn batch_norm_examples() {
    let mut g = Graph::new();
    let gamma = g.constant(Tensor::vector(vec![1.0]));
    let beta = g.constant(Tensor::vector(vec![0.0]));
    let x = g.constant(Tensor::from_rows(&[vec![0.0], vec![2.0]]).unwrap());
    let y = g.batch_norm(x, gamma, beta, 1e-5).unwrap();
    for (a, w) in g.value(y).data().iter().zip([-1.0, 1.0]) {
        assert!((a - w).abs() < 1e-5);
    }

    let shift = g.constant(Tensor::vector(vec![0.7]));
    let x = g.constant(Tensor::filled(&[5, 1], 3.0));
    let y = g.batch_norm(x, gamma, shift, 1e-5).unwrap();
    assert!(g.value(y).data().iter().all(|&v| v == 0.7));

    let single = g.constant(Tensor::zeros(&[1, 1]));
    assert!(matches!(
        g.batch_norm(single, gamma, beta, 1e-5),
        Err(ndiff::NdError::DegenerateBatch(_))
    ));

    // moment check on a random batch
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xt = rand_tensor(&mut rng, &[400, 3]).map(|v| 5.0 * v + 2.0);
    let scale = g.constant(Tensor::vector(vec![2.0, 0.5, 1.0]));
    let shift = g.constant(Tensor::vector(vec![-1.0, 3.0, 0.0]));
    let x = g.constant(xt);
    let y = g.batch_norm(x, scale, shift, 1e-5).unwrap();
    let (mean, var) = g.value(y).column_moments();
    for (j, (s, t)) in [(2.0, -1.0), (0.5, 3.0), (1.0, 0.0)].iter().enumerate() {
        assert!((mean[j] - t).abs() < 1e-9);
        assert!((var[j].sqrt() - s).abs() < 1e-4);
    }
}

#[test]
fn cross_entropy_examples() {
    let mut g = Graph::new();
    let logits = g.constant(Tensor::zeros(&[1, 5]));
    let mut t = Tensor::zeros(&[1, 5]);
    t.data_mut()[2] = 1.0;
    let l = g.softmax_cross_entropy(logits, &t).unwrap();
    assert!((g.value(l).data()[0] - 5f64.ln()).abs() < 1e-15);

    let t2 = Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap();
    let logits = g.constant(Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap());
    let l = g.softmax_cross_entropy(logits, &t2).unwrap();
    let want = (1.0 + (-1.0f64).exp()).ln();
    assert!((g.value(l).data()[0] - want).abs() < 1e-15);

    let mut prev = f64::INFINITY;
    for margin in [1.0, 5.0, 20.0, 60.0] {
        let logits = g.constant(Tensor::from_rows(&[vec![margin, 0.0]]).unwrap());
        let lv = g.softmax_cross_entropy(logits, &t2).unwrap();
        let l = g.value(lv).data()[0];
        assert!(l < prev);
        prev = l;
    }
    assert!(prev < 1e-20);

    let bad = Tensor::from_rows(&[vec![0.5, 0.5]]).unwrap();
    let logits = g.constant(Tensor::zeros(&[1, 2]));
    assert!(matches!(
        g.softmax_cross_entropy(logits, &bad),
        Err(ndiff::NdError::Input(_))
    ));
}

#[test]
fn forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = Sequential::new(
        &[41, 1],
        vec![
            LayerSpec::Conv1d { filters: 4, kernel: 3 },
            LayerSpec::Relu,
            LayerSpec::MaxPool1d { pool: 2 },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 5 },
        ],
        &mut rng,
    )
    .unwrap();
    let x = rand_tensor(&mut rng, &[3, 41, 1]);
    let a = m.predict(&x).unwrap();
    let b = m.predict(&x).unwrap();
    assert_eq!(a.data(), b.data());
}
