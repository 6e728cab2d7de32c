//! Layer stacks built on the tape.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NdError, Result};
use crate::graph::{softmax_in_place, Graph, LstmParams, Var};
use crate::tensor::Tensor;

pub const BATCH_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { units: usize },
    Relu,
    LeakyRelu { slope: f64 },
    Sigmoid,
    Tanh,
    Softmax,
    BatchNorm,
    Conv1d { filters: usize, kernel: usize },
    MaxPool1d { pool: usize },
    Lstm { units: usize, return_sequences: bool },
    Flatten,
}

/// Whether batch norm uses batch statistics (and updates running ones) or
/// the running averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Output shape (without the batch axis) after applying `spec` to `input`.
pub fn output_shape(spec: &LayerSpec, input: &[usize]) -> Result<Vec<usize>> {
    let bad = |msg: String| Err(NdError::Config(msg));
    match spec {
        LayerSpec::Dense { units } => {
            if *units == 0 {
                return bad("dense layer with zero units".into());
            }
            if input.len() != 1 {
                return bad(format!("dense layer after {input:?}; flatten first"));
            }
            Ok(vec![*units])
        }
        LayerSpec::Relu
        | LayerSpec::LeakyRelu { .. }
        | LayerSpec::Sigmoid
        | LayerSpec::Tanh
        | LayerSpec::Softmax => Ok(input.to_vec()),
        LayerSpec::BatchNorm => {
            if input.len() != 1 {
                return bad(format!("batch norm expects flat features, got {input:?}"));
            }
            Ok(input.to_vec())
        }
        LayerSpec::Conv1d { filters, kernel } => {
            if *filters == 0 || *kernel == 0 {
                return bad("conv1d sizes must be positive".into());
            }
            if input.len() != 2 || input[0] < *kernel {
                return bad(format!("conv1d kernel {kernel} on {input:?}"));
            }
            Ok(vec![input[0] - kernel + 1, *filters])
        }
        LayerSpec::MaxPool1d { pool } => {
            if *pool == 0 || input.len() != 2 {
                return bad(format!("maxpool {pool} on {input:?}"));
            }
            let t = if input[0] < *pool { 1 } else { input[0] / pool };
            Ok(vec![t, input[1]])
        }
        LayerSpec::Lstm {
            units,
            return_sequences,
        } => {
            if *units == 0 || input.len() != 2 {
                return bad(format!("lstm {units} on {input:?}"));
            }
            Ok(if *return_sequences {
                vec![input[0], *units]
            } else {
                vec![*units]
            })
        }
        LayerSpec::Flatten => Ok(vec![input.iter().product()]),
    }
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize, shape: &[usize]) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.random_range(-limit..limit);
    }
    t
}

fn param_shapes(spec: &LayerSpec, input: &[usize]) -> Vec<Vec<usize>> {
    match spec {
        LayerSpec::Dense { units } => vec![vec![input[0], *units], vec![*units]],
        LayerSpec::BatchNorm => vec![input.to_vec(), input.to_vec()],
        LayerSpec::Conv1d { filters, kernel } => {
            vec![vec![*filters, *kernel, input[1]], vec![*filters]]
        }
        LayerSpec::Lstm { units, .. } => vec![vec![units + input[1], 4 * units], vec![4 * units]],
        _ => Vec::new(),
    }
}

/// Freshly initialized parameters for one layer.
fn init_params(spec: &LayerSpec, input: &[usize], rng: &mut impl Rng) -> Vec<Tensor> {
    match spec {
        LayerSpec::Dense { units } => {
            let q = input[0];
            vec![glorot(rng, q, *units, &[q, *units]), Tensor::zeros(&[*units])]
        }
        LayerSpec::BatchNorm => vec![Tensor::filled(input, 1.0), Tensor::zeros(input)],
        LayerSpec::Conv1d { filters, kernel } => {
            let c = input[1];
            vec![
                glorot(rng, kernel * c, kernel * filters, &[*filters, *kernel, c]),
                Tensor::zeros(&[*filters]),
            ]
        }
        LayerSpec::Lstm { units, .. } => {
            let h = *units;
            let c = input[1];
            let w = glorot(rng, h + c, 4 * h, &[h + c, 4 * h]);
            let mut b = Tensor::zeros(&[4 * h]);
            // unit forget bias
            b.data_mut()[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
            vec![w, b]
        }
        _ => Vec::new(),
    }
}

/// Running mean/variance kept by a batch-norm layer for inference.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// A feed-forward stack of layers with its parameters.
#[derive(Clone, Debug)]
pub struct Sequential {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    params: Vec<Vec<Tensor>>,
    running: Vec<Option<RunningStats>>,
}

/// Result of recording a forward pass: the output node plus the parameter
/// leaves, flattened in layer order, whose gradients feed the optimizer.
pub struct Forward {
    pub output: Var,
    pub param_vars: Vec<Var>,
    batch_moments: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

impl Sequential {
    pub fn new(input_shape: &[usize], layers: Vec<LayerSpec>, rng: &mut impl Rng) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        let mut params = Vec::with_capacity(layers.len());
        let mut running = Vec::with_capacity(layers.len());
        for spec in &layers {
            let next = output_shape(spec, &shape)?;
            params.push(init_params(spec, &shape, rng));
            running.push(match spec {
                LayerSpec::BatchNorm => Some(RunningStats {
                    mean: vec![0.0; shape[0]],
                    var: vec![1.0; shape[0]],
                }),
                _ => None,
            });
            shape = next;
        }
        Ok(Sequential {
            input_shape: input_shape.to_vec(),
            layers,
            params,
            running,
        })
    }

    /// Reassembles a model from stored parts, validating every shape.
    pub fn from_parts(
        input_shape: Vec<usize>,
        layers: Vec<LayerSpec>,
        params: Vec<Vec<Tensor>>,
        running: Vec<Option<RunningStats>>,
    ) -> Result<Self> {
        if params.len() != layers.len() || running.len() != layers.len() {
            return Err(NdError::Checkpoint("layer count mismatch".into()));
        }
        let mut shape = input_shape.clone();
        for (i, spec) in layers.iter().enumerate() {
            let next = output_shape(spec, &shape)?;
            let expect = param_shapes(spec, &shape);
            if expect.len() != params[i].len()
                || expect
                    .iter()
                    .zip(&params[i])
                    .any(|(a, b)| a[..] != *b.shape())
            {
                return Err(NdError::Checkpoint(format!(
                    "parameter shapes of layer {i} do not match {spec:?}"
                )));
            }
            shape = next;
        }
        Ok(Sequential {
            input_shape,
            layers,
            params,
            running,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Vec<Tensor>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<Tensor>] {
        &mut self.params
    }

    pub fn running(&self) -> &[Option<RunningStats>] {
        &self.running
    }

    pub fn output_shape(&self) -> Vec<usize> {
        let mut shape = self.input_shape.clone();
        for spec in &self.layers {
            shape = output_shape(spec, &shape).expect("validated at construction");
        }
        shape
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().flatten().map(Tensor::len).sum()
    }

    /// Flat list of parameter tensors in layer order.
    pub fn flat_params_mut(&mut self) -> Vec<&mut Tensor> {
        self.params.iter_mut().flatten().collect()
    }

    /// Records a forward pass of `input` (batch axis first) on `g`.
    pub fn forward(&self, g: &mut Graph, input: Var, mode: Mode) -> Result<Forward> {
        let expect = &self.input_shape;
        if g.value(input).shape().get(1..) != Some(&expect[..]) {
            return Err(NdError::Shape(format!(
                "model expects [N, {expect:?}], got {:?}",
                g.value(input).shape()
            )));
        }
        let mut x = input;
        let mut param_vars = Vec::new();
        let mut batch_moments = Vec::with_capacity(self.layers.len());
        for (li, spec) in self.layers.iter().enumerate() {
            let pv: Vec<Var> = match mode {
                Mode::Train => self.params[li].iter().map(|t| g.param(t.clone())).collect(),
                Mode::Infer => self.params[li].iter().map(|t| g.constant(t.clone())).collect(),
            };
            let mut moments = None;
            x = match spec {
                LayerSpec::Dense { .. } => g.dense(x, pv[0], pv[1])?,
                LayerSpec::Relu => g.relu(x)?,
                LayerSpec::LeakyRelu { slope } => g.leaky_relu(x, *slope)?,
                LayerSpec::Sigmoid => g.sigmoid(x)?,
                LayerSpec::Tanh => g.tanh(x)?,
                LayerSpec::Softmax => g.softmax(x)?,
                LayerSpec::BatchNorm => match mode {
                    Mode::Train => {
                        moments = Some(g.value(x).column_moments());
                        g.batch_norm(x, pv[0], pv[1], BATCH_NORM_EPS)?
                    }
                    Mode::Infer => {
                        let stats = self.running[li].as_ref().expect("batch norm has stats");
                        let t = batch_norm_infer(g.value(x), stats, &self.params[li]);
                        g.constant(t)
                    }
                },
                LayerSpec::Conv1d { .. } => g.conv1d(x, pv[0], pv[1])?,
                LayerSpec::MaxPool1d { pool } => g.maxpool1d(x, *pool)?,
                LayerSpec::Lstm {
                    units,
                    return_sequences,
                } => lstm_layer(g, x, *units, *return_sequences, pv[0], pv[1])?,
                LayerSpec::Flatten => {
                    let s = g.value(x).shape().to_vec();
                    let n = s[0];
                    g.reshape(x, vec![n, s[1..].iter().product()])?
                }
            };
            batch_moments.push(moments);
            param_vars.extend(pv);
        }
        Ok(Forward {
            output: x,
            param_vars,
            batch_moments,
        })
    }

    /// Folds the batch statistics of a training forward pass into the
    /// running averages.
    pub fn update_running(&mut self, fwd: &Forward) {
        for (stats, moments) in self.running.iter_mut().zip(&fwd.batch_moments) {
            if let (Some(s), Some((mean, var))) = (stats.as_mut(), moments.as_ref()) {
                for (r, m) in s.mean.iter_mut().zip(mean) {
                    *r = (1.0 - BATCH_NORM_MOMENTUM) * *r + BATCH_NORM_MOMENTUM * m;
                }
                for (r, v) in s.var.iter_mut().zip(var) {
                    *r = (1.0 - BATCH_NORM_MOMENTUM) * *r + BATCH_NORM_MOMENTUM * v;
                }
            }
        }
    }

    /// Inference-mode forward pass returning the raw output.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let input = g.constant(x.clone());
        let fwd = self.forward(&mut g, input, Mode::Infer)?;
        Ok(g.value(fwd.output).clone())
    }

    /// Inference output passed through a row softmax.
    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        let mut out = self.predict(x)?;
        let c = out.last_dim();
        for row in out.data_mut().chunks_mut(c) {
            softmax_in_place(row);
        }
        Ok(out)
    }
}

fn batch_norm_infer(x: &Tensor, stats: &RunningStats, params: &[Tensor]) -> Tensor {
    let c = x.last_dim();
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(c) {
        for j in 0..c {
            let h = (row[j] - stats.mean[j]) / (stats.var[j] + BATCH_NORM_EPS).sqrt();
            row[j] = h * params[0].data()[j] + params[1].data()[j];
        }
    }
    out
}

fn lstm_layer(
    g: &mut Graph,
    x: Var,
    units: usize,
    return_sequences: bool,
    weights: Var,
    bias: Var,
) -> Result<Var> {
    let shape = g.value(x).shape().to_vec();
    let (n, t) = (shape[0], shape[1]);
    let p = LstmParams { weights, bias };
    let mut h = g.constant(Tensor::zeros(&[n, units]));
    let mut c = g.constant(Tensor::zeros(&[n, units]));
    let mut outputs = Vec::with_capacity(if return_sequences { t } else { 0 });
    for step in 0..t {
        let xt = g.time_step(x, step)?;
        let (h2, c2) = g.lstm_step(xt, h, c, &p)?;
        h = h2;
        c = c2;
        if return_sequences {
            outputs.push(h);
        }
    }
    if return_sequences {
        g.stack_time(&outputs)
    } else {
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fnn_topology_parameter_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = Sequential::new(
            &[41],
            vec![
                LayerSpec::Dense { units: 50 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: 30 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: 20 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: 5 },
            ],
            &mut rng,
        )
        .unwrap();
        // 41*50+50 + 50*30+30 + 30*20+20 + 20*5+5
        assert_eq!(m.param_count(), 4355);
    }

    #[test]
    fn cnn_flatten_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = Sequential::new(
            &[41, 1],
            vec![
                LayerSpec::Conv1d {
                    filters: 32,
                    kernel: 3,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool1d { pool: 2 },
                LayerSpec::Flatten,
            ],
            &mut rng,
        )
        .unwrap();
        assert_eq!(m.output_shape(), vec![19 * 32]);
    }

    #[test]
    fn incompatible_layers_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = Sequential::new(&[4, 2], vec![LayerSpec::Dense { units: 3 }], &mut rng);
        assert!(matches!(r, Err(NdError::Config(_))));
        let r = Sequential::new(&[2, 1], vec![LayerSpec::Conv1d { filters: 1, kernel: 3 }], &mut rng);
        assert!(r.is_err());
    }

    #[test]
    fn zeroed_head_gives_uniform_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = Sequential::new(
            &[3],
            vec![LayerSpec::Dense { units: 4 }, LayerSpec::Relu, LayerSpec::Dense { units: 5 }],
            &mut rng,
        )
        .unwrap();
        for t in m.params_mut()[2].iter_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let x = Tensor::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.0, 0.0, 3.0]]).unwrap();
        let p = m.predict_proba(&x).unwrap();
        assert!(p.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn inference_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Sequential::new(
            &[6, 1],
            vec![
                LayerSpec::Lstm {
                    units: 4,
                    return_sequences: true,
                },
                LayerSpec::Lstm {
                    units: 3,
                    return_sequences: false,
                },
                LayerSpec::Dense { units: 2 },
            ],
            &mut rng,
        )
        .unwrap();
        let x = Tensor::new(vec![2, 6, 1], (0..12).map(|i| i as f64 * 0.1).collect()).unwrap();
        assert_eq!(m.predict(&x).unwrap(), m.predict(&x).unwrap());
    }
}
