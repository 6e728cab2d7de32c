use ndiff::{Adam, AdamConfig, Graph, LayerSpec, Mode, Sequential, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::TrainView;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuralKind {
    Fnn,
    Lstm,
    Cnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs without held-out improvement before stopping.
    pub patience: usize,
    /// Fraction of the training rows held out for early stopping.
    pub holdout: f64,
}

impl Default for NeuralParams {
    fn default() -> Self {
        NeuralParams {
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-3,
            patience: 10,
            holdout: 0.1,
        }
    }
}

impl NeuralKind {
    /// Per-sample input shape for `d` features. Sequence models read the
    /// features as a `d`-step, single-channel sequence.
    pub fn input_shape(self, d: usize) -> Vec<usize> {
        match self {
            NeuralKind::Fnn => vec![d],
            NeuralKind::Lstm | NeuralKind::Cnn => vec![d, 1],
        }
    }

    pub fn layers(self, n_classes: usize) -> Vec<LayerSpec> {
        use LayerSpec::*;
        match self {
            NeuralKind::Fnn => vec![
                Dense { units: 50 },
                Relu,
                Dense { units: 30 },
                Relu,
                Dense { units: 20 },
                Relu,
                Dense { units: n_classes },
            ],
            NeuralKind::Lstm => vec![
                Lstm { units: 100, return_sequences: true },
                Lstm { units: 100, return_sequences: false },
                Dense { units: n_classes },
            ],
            NeuralKind::Cnn => vec![
                Conv1d { filters: 32, kernel: 3 },
                Relu,
                MaxPool1d { pool: 2 },
                Flatten,
                Dense { units: 100 },
                Relu,
                Dense { units: n_classes },
            ],
        }
    }
}

/// A softmax classifier: the network emits logits, scores are their softmax.
#[derive(Clone, Debug)]
pub struct NeuralClassifier {
    pub kind: NeuralKind,
    pub model: Sequential,
    /// Held-out loss after each completed epoch.
    pub history: Vec<f64>,
}

fn batch_input(kind: NeuralKind, x: &[f64], d: usize, rows: &[usize]) -> Tensor {
    let mut data = Vec::with_capacity(rows.len() * d);
    for &r in rows {
        data.extend_from_slice(&x[r * d..(r + 1) * d]);
    }
    let mut shape = vec![rows.len()];
    shape.extend(kind.input_shape(d));
    Tensor::new(shape, data).expect("sizes agree")
}

fn one_hot(y: &[usize], rows: &[usize], k: usize) -> Tensor {
    let mut t = Tensor::zeros(&[rows.len(), k]);
    for (i, &r) in rows.iter().enumerate() {
        t.data_mut()[i * k + y[r]] = 1.0;
    }
    t
}

fn mean_loss(kind: NeuralKind, model: &Sequential, data: TrainView<'_>, rows: &[usize], batch: usize) -> Result<f64> {
    let mut total = 0.0;
    for chunk in rows.chunks(batch.max(1)) {
        let mut g = Graph::new();
        let input = g.constant(batch_input(kind, data.x, data.d, chunk));
        let fwd = model.forward(&mut g, input, Mode::Infer)?;
        let loss = g.softmax_cross_entropy(fwd.output, &one_hot(data.y, chunk, data.n_classes))?;
        total += g.value(loss).data()[0] * chunk.len() as f64;
    }
    Ok(total / rows.len() as f64)
}

impl NeuralClassifier {
    pub fn fit(kind: NeuralKind, data: TrainView<'_>, params: &NeuralParams, seed: u64) -> Result<Self> {
        let n = data.y.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if params.batch_size == 0 || !(0.0..1.0).contains(&params.holdout) {
            return Err(Error::Config("batch_size must be positive and holdout in [0, 1)".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Sequential::new(&kind.input_shape(data.d), kind.layers(data.n_classes), &mut rng)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let n_hold = (n as f64 * params.holdout).round() as usize;
        let n_hold = if n - n_hold == 0 { 0 } else { n_hold };
        let (held, train) = order.split_at(n_hold);
        let (held, mut train) = (held.to_vec(), train.to_vec());

        let mut adam = Adam::new(
            AdamConfig::classifier(params.learning_rate),
            model.params().iter().flatten(),
        );
        let mut best = (f64::INFINITY, model.clone());
        let mut history = Vec::new();
        let mut stale = 0;
        for epoch in 0..params.epochs {
            train.shuffle(&mut rng);
            for (bi, chunk) in train.chunks(params.batch_size).enumerate() {
                let mut g = Graph::new();
                let input = g.constant(batch_input(kind, data.x, data.d, chunk));
                let fwd = model.forward(&mut g, input, Mode::Train)?;
                let loss = g.softmax_cross_entropy(fwd.output, &one_hot(data.y, chunk, data.n_classes))?;
                if !g.value(loss).data()[0].is_finite() {
                    return Err(Error::Divergence { epoch, batch: bi });
                }
                g.backward(loss)?;
                let grads: Vec<Tensor> = fwd
                    .param_vars
                    .iter()
                    .map(|&v| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(g.value(v).shape())))
                    .collect();
                let grad_refs: Vec<&Tensor> = grads.iter().collect();
                adam.step(&mut model.flat_params_mut(), &grad_refs)?;
            }
            let eval_rows = if held.is_empty() { &train } else { &held };
            let loss = mean_loss(kind, &model, data, eval_rows, 1024)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: 0 });
            }
            history.push(loss);
            if loss < best.0 {
                best = (loss, model.clone());
                stale = 0;
            } else {
                stale += 1;
                if stale >= params.patience {
                    break;
                }
            }
        }
        if best.0.is_finite() {
            model = best.1;
        }
        Ok(NeuralClassifier { kind, model, history })
    }

    /// Softmax probabilities, one row per input row.
    pub fn scores(&self, x: &[f64], d: usize) -> Result<Vec<Vec<f64>>> {
        let n = x.len().checked_div(d).unwrap_or(0);
        let mut out = Vec::with_capacity(n);
        let rows: Vec<usize> = (0..n).collect();
        for chunk in rows.chunks(1024) {
            let p = self.model.predict_proba(&batch_input(self.kind, x, d, chunk))?;
            for i in 0..chunk.len() {
                out.push(p.row(i).to_vec());
            }
        }
        Ok(out)
    }
}
