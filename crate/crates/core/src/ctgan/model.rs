use std::io::{Read, Write};

use ndiff::{read_checkpoint, write_checkpoint, Adam, AdamConfig, Graph, LayerSpec, Mode, Sequential, Tensor, Var};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::layout::{argmax_first, build_layout, encode_cells, expand_cells, gan_row, inverse_transform_row, Codecs, ModeChoice, RowLayout, Span};
use super::sampler::{frequency_index, original_condition, CondSampler, CondVector, FrequencyTable};
use crate::data::{ClassLabel, ColumnMeta, FeatureTable};
use crate::error::{Error, Result};

const CRITIC_SLOPE: f64 = 0.2;
const FORMAT: &str = "tabsynth-gan-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub noise_dim: usize,
    /// Width of both hidden layers, in both networks.
    pub hidden: usize,
    pub critic_steps: usize,
    pub gp_weight: f64,
    pub learning_rate: f64,
    /// Gumbel-softmax temperature of the one-hot heads during training.
    pub temperature: f64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            epochs: 300,
            batch_size: 500,
            noise_dim: 128,
            hidden: 256,
            critic_steps: 1,
            gp_weight: 10.0,
            learning_rate: 2e-4,
            temperature: 0.2,
        }
    }
}

impl GanConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("GAN batch size must be at least 2".into()));
        }
        if self.noise_dim == 0 || self.hidden == 0 || self.critic_steps == 0 {
            return Err(Error::Config("noise_dim, hidden and critic_steps must be positive".into()));
        }
        if !(self.temperature > 0.0 && self.learning_rate > 0.0 && self.gp_weight >= 0.0) {
            return Err(Error::Config("temperature and learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// A GAN-table encoded once up front: per cell either `(alpha, mode)` or
/// `(category, 0)`, expanded to full vectors per batch.
#[derive(Clone, Debug)]
pub struct TransformedTable {
    layout: RowLayout,
    cells: Vec<(f64, usize)>,
    n_cols: usize,
    sampler: CondSampler,
}

impl TransformedTable {
    /// Encodes every row of `table` (label appended), sampling modes.
    pub fn new(codecs: &Codecs, table: &FeatureTable, seed: u64) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let layout = build_layout(codecs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_cols = codecs.columns.len();
        let mut cells = Vec::with_capacity(table.n_rows() * n_cols);
        for i in 0..table.n_rows() {
            cells.extend(encode_cells(codecs, &gan_row(table, i), ModeChoice::Sample, &mut rng)?);
        }
        let discrete: Vec<usize> = layout.discrete_spans().map(Span::column).collect();
        let sampler = CondSampler::new(
            &layout,
            cells
                .chunks(n_cols)
                .map(|row| discrete.iter().map(|&j| row[j].0 as usize).collect()),
        );
        Ok(TransformedTable {
            layout,
            cells,
            n_cols,
            sampler,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len() / self.n_cols
    }

    pub fn layout(&self) -> &RowLayout {
        &self.layout
    }

    pub fn sampler(&self) -> &CondSampler {
        &self.sampler
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.width];
        self.write_row(i, &mut out);
        out
    }

    pub fn write_row(&self, i: usize, out: &mut [f64]) {
        expand_cells(&self.layout, &self.cells[i * self.n_cols..(i + 1) * self.n_cols], out);
    }
}

/// Mean losses over one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub critic: f64,
    pub generator: f64,
}

/// A trained (or freshly initialized) conditional generator and its critic.
#[derive(Clone, Debug)]
pub struct GanModel {
    codecs: Codecs,
    layout: RowLayout,
    config: GanConfig,
    seed: u64,
    generator: Sequential,
    critic: Sequential,
    frequencies: Vec<FrequencyTable>,
    cumulative: Vec<WeightedIndex<f64>>,
    history: Vec<EpochLoss>,
}

#[derive(Serialize, Deserialize)]
struct GanMeta {
    format: String,
    codec_hash: String,
    codecs: Codecs,
    layout: RowLayout,
    config: GanConfig,
    seed: u64,
    frequencies: Vec<FrequencyTable>,
    history: Vec<EpochLoss>,
}

struct Batch {
    conds: Vec<CondVector>,
    cond: Tensor,
    real: Option<Tensor>,
}

/// Critic weights as graph leaves: `[W1, b1, W2, b2, W3, b3]`, the order of
/// `Sequential::flat_params_mut` for the critic stack.
struct CriticVars([Var; 6]);

impl GanModel {
    fn init(
        codecs: &Codecs,
        layout: RowLayout,
        config: &GanConfig,
        frequencies: Vec<FrequencyTable>,
        seed: u64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let h = config.hidden;
        let generator = Sequential::new(
            &[config.noise_dim + layout.cond_width],
            vec![
                LayerSpec::Dense { units: h },
                LayerSpec::BatchNorm,
                LayerSpec::Relu,
                LayerSpec::Dense { units: h },
                LayerSpec::BatchNorm,
                LayerSpec::Relu,
                LayerSpec::Dense { units: layout.width },
            ],
            rng,
        )?;
        let critic = Sequential::new(
            &[layout.width + layout.cond_width],
            vec![
                LayerSpec::Dense { units: h },
                LayerSpec::LeakyRelu { slope: CRITIC_SLOPE },
                LayerSpec::Dense { units: h },
                LayerSpec::LeakyRelu { slope: CRITIC_SLOPE },
                LayerSpec::Dense { units: 1 },
            ],
            rng,
        )?;
        let cumulative = frequency_index(&frequencies);
        Ok(GanModel {
            codecs: codecs.clone(),
            layout,
            config: config.clone(),
            seed,
            generator,
            critic,
            frequencies,
            cumulative,
            history: Vec::new(),
        })
    }

    pub fn codecs(&self) -> &Codecs {
        &self.codecs
    }

    pub fn layout(&self) -> &RowLayout {
        &self.layout
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn history(&self) -> &[EpochLoss] {
        &self.history
    }

    pub fn generator(&self) -> &Sequential {
        &self.generator
    }

    pub fn critic(&self) -> &Sequential {
        &self.critic
    }

    pub fn frequencies(&self) -> &[FrequencyTable] {
        &self.frequencies
    }

    /// Validates `(column, category)` against the layout.
    pub fn condition(&self, column: usize, category: usize) -> Result<CondVector> {
        match self.layout.span_of(column) {
            Some(&Span::Discrete {
                n_categories,
                cond_start,
                ..
            }) if category < n_categories => Ok(CondVector {
                column,
                category,
                slot: cond_start + category,
            }),
            Some(&Span::Discrete { .. }) => Err(Error::Input(format!(
                "column {column} has no category {category}"
            ))),
            _ => Err(Error::Input(format!("column {column} is not a discrete column"))),
        }
    }

    /// Condition selecting a class in the label column.
    pub fn label_condition(&self, label: ClassLabel) -> Result<CondVector> {
        let j = self.codecs.label_column();
        let k = self.codecs.columns[j]
            .category_of(label.index() as f64)
            .ok_or_else(|| Error::Input(format!("class {label} was absent from the GAN training data")))?;
        self.condition(j, k)
    }

    /// Hardened transformed vectors: tanh alpha, exactly one hot slot per
    /// one-hot span, and the condition span overwritten when given.
    pub fn generate_vectors(
        &self,
        n: usize,
        condition: Option<CondVector>,
        rng: &mut impl Rng,
    ) -> Result<Vec<Vec<f64>>> {
        let mut out = self.generate_unforced(n, condition, rng)?;
        if let Some(c) = condition {
            let span = self.layout.spans[c.column];
            let s = span.start();
            for v in &mut out {
                v[s..s + span.width()].iter_mut().for_each(|x| *x = 0.0);
                v[s + c.category] = 1.0;
            }
        }
        Ok(out)
    }

    /// Like [`generate_vectors`](Self::generate_vectors) but leaves the
    /// conditioned span as the generator produced it, which shows how well
    /// the generator itself honours the condition.
    pub fn generate_unforced(
        &self,
        n: usize,
        condition: Option<CondVector>,
        rng: &mut impl Rng,
    ) -> Result<Vec<Vec<f64>>> {
        if let Some(c) = condition {
            self.condition(c.column, c.category)?;
        }
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let b = (n - out.len()).min(self.config.batch_size);
            let mut conds = Vec::with_capacity(b);
            for _ in 0..b {
                conds.push(match condition {
                    Some(c) => c,
                    None => original_condition(&self.frequencies, &self.cumulative, rng)?,
                });
            }
            let input = self.noise_input(&conds, rng);
            let raw = self.generator.predict(&input)?;
            for r in 0..b {
                let mut v = raw.row(r).to_vec();
                harden(&self.layout, &mut v);
                out.push(v);
            }
        }
        Ok(out)
    }

    /// Synthetic GAN-table rows (features then label index).
    pub fn generate(
        &self,
        n: usize,
        condition: Option<(usize, usize)>,
        rng: &mut impl Rng,
    ) -> Result<Vec<Vec<f64>>> {
        let cond = condition.map(|(j, k)| self.condition(j, k)).transpose()?;
        self.generate_vectors(n, cond, rng)?
            .iter()
            .map(|v| inverse_transform_row(&self.codecs, &self.layout, v))
            .collect()
    }

    /// Synthetic rows as a feature table with `columns`, optionally all of
    /// one class.
    pub fn generate_table(
        &self,
        n: usize,
        label: Option<ClassLabel>,
        columns: &[ColumnMeta],
        rng: &mut impl Rng,
    ) -> Result<FeatureTable> {
        if columns.len() != self.codecs.n_features() {
            return Err(Error::Shape(format!(
                "{} columns requested, the model has {} features",
                columns.len(),
                self.codecs.n_features()
            )));
        }
        let cond = label.map(|l| self.label_condition(l)).transpose()?;
        let vectors = self.generate_vectors(n, cond, rng)?;
        let d = columns.len();
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for v in &vectors {
            let mut row = inverse_transform_row(&self.codecs, &self.layout, v)?;
            let code = row.pop().expect("label cell");
            labels.push(
                ClassLabel::from_index(code as usize)
                    .ok_or_else(|| Error::State(format!("label category {code} is not a class")))?,
            );
            data.extend(row);
        }
        FeatureTable::from_flat(columns.to_vec(), data, labels)
    }

    /// `[noise | condition]` rows; noise is standard normal.
    fn noise_input(&self, conds: &[CondVector], rng: &mut impl Rng) -> Tensor {
        let (z, cw) = (self.config.noise_dim, self.layout.cond_width);
        let mut data = Vec::with_capacity(conds.len() * (z + cw));
        for c in conds {
            data.extend((0..z).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let at = data.len();
            data.resize(at + cw, 0.0);
            data[at + c.slot] = 1.0;
        }
        Tensor::new(vec![conds.len(), z + cw], data).expect("consistent shape")
    }

    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        let meta = GanMeta {
            format: FORMAT.into(),
            codec_hash: self.codecs.hash(),
            codecs: self.codecs.clone(),
            layout: self.layout.clone(),
            config: self.config.clone(),
            seed: self.seed,
            frequencies: self.frequencies.clone(),
            history: self.history.clone(),
        };
        write_checkpoint(
            w,
            &[("generator", &self.generator), ("critic", &self.critic)],
            &serde_json::to_value(&meta)?,
        )?;
        Ok(())
    }

    /// SHA-256 of the serialized checkpoint.
    pub fn content_hash(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.save(&mut buf)?;
        Ok(crate::hash::sha256_hex(&buf))
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let mut ck = read_checkpoint(r)?;
        let meta: GanMeta = serde_json::from_value(ck.meta.take())?;
        if meta.format != FORMAT {
            return Err(Error::State(format!("unsupported GAN format {:?}", meta.format)));
        }
        if meta.codec_hash != meta.codecs.hash() || build_layout(&meta.codecs)? != meta.layout {
            return Err(Error::State("GAN checkpoint codecs do not match their hash or layout".into()));
        }
        let generator = ck.take("generator")?;
        let critic = ck.take("critic")?;
        let (w, cw) = (meta.layout.width, meta.layout.cond_width);
        if generator.input_shape() != [meta.config.noise_dim + cw]
            || generator.output_shape() != [w]
            || critic.input_shape() != [w + cw]
            || critic.output_shape() != [1]
        {
            return Err(Error::State("GAN network widths do not match the layout".into()));
        }
        let cumulative = frequency_index(&meta.frequencies);
        Ok(GanModel {
            codecs: meta.codecs,
            layout: meta.layout,
            config: meta.config,
            seed: meta.seed,
            generator,
            critic,
            frequencies: meta.frequencies,
            cumulative,
            history: meta.history,
        })
    }

    fn draw_batch(&self, data: &TransformedTable, with_rows: bool, rng: &mut impl Rng) -> Result<Batch> {
        let b = self.config.batch_size;
        let (w, cw) = (self.layout.width, self.layout.cond_width);
        let mut conds = Vec::with_capacity(b);
        let mut cond = vec![0.0; b * cw];
        let mut real = if with_rows { vec![0.0; b * w] } else { Vec::new() };
        for r in 0..b {
            let c = data.sampler().sample_condition(rng)?;
            cond[r * cw + c.slot] = 1.0;
            if with_rows {
                let i = data.sampler().sample_conditioned_row(&c, rng)?;
                data.write_row(i, &mut real[r * w..(r + 1) * w]);
            }
            conds.push(c);
        }
        Ok(Batch {
            conds,
            cond: Tensor::new(vec![b, cw], cond)?,
            real: if with_rows {
                Some(Tensor::new(vec![b, w], real)?)
            } else {
                None
            },
        })
    }

    fn critic_vars(&self, g: &mut Graph, trainable: bool) -> CriticVars {
        let p = self.critic.params();
        let mut leaf = |t: &Tensor| if trainable { g.param(t.clone()) } else { g.constant(t.clone()) };
        CriticVars([
            leaf(&p[0][0]),
            leaf(&p[0][1]),
            leaf(&p[2][0]),
            leaf(&p[2][1]),
            leaf(&p[4][0]),
            leaf(&p[4][1]),
        ])
    }

    /// Generator output with soft heads, recorded on `g` in training mode.
    fn soft_fake(&self, g: &mut Graph, batch: &Batch, rng: &mut impl Rng) -> Result<(Var, ndiff::Forward)> {
        let input = self.noise_input(&batch.conds, rng);
        let input = g.constant(input);
        let fwd = self.generator.forward(g, input, Mode::Train)?;
        let fake = soft_heads(g, fwd.output, &self.layout, self.config.temperature, rng)?;
        Ok((fake, fwd))
    }

    fn critic_step(&mut self, adam: &mut Adam, batch: &Batch, rng: &mut impl Rng) -> Result<f64> {
        let real = batch.real.as_ref().expect("critic batches carry real rows");
        let fake = {
            let mut scratch = Graph::new();
            let (fake, _) = self.soft_fake(&mut scratch, batch, rng)?;
            scratch.value(fake).clone()
        };
        let b = real.rows();
        let real_in = join_cols(real, &batch.cond);
        let fake_in = join_cols(&fake, &batch.cond);
        let mut mixed = real_in.clone();
        let width = real_in.last_dim();
        for r in 0..b {
            let eps: f64 = rng.random();
            let f = fake_in.row(r);
            for (m, &fv) in mixed.data_mut()[r * width..(r + 1) * width].iter_mut().zip(f) {
                *m = eps * *m + (1.0 - eps) * fv;
            }
        }

        let mut g = Graph::new();
        let cv = self.critic_vars(&mut g, true);
        let xr = g.constant(real_in);
        let xf = g.constant(fake_in);
        let xm = g.constant(mixed);
        let (_, _, d_real) = critic_forward(&mut g, &cv, xr)?;
        let (_, _, d_fake) = critic_forward(&mut g, &cv, xf)?;
        let (z1, z2, _) = critic_forward(&mut g, &cv, xm)?;
        let m_real = g.mean(d_real)?;
        let m_fake = g.mean(d_fake)?;
        let wasserstein = g.sub(m_fake, m_real)?;
        let penalty = gradient_penalty(&mut g, &cv, z1, z2, b)?;
        let penalty = g.scale(penalty, self.config.gp_weight)?;
        let loss = g.add(wasserstein, penalty)?;
        let value = g.value(loss).data()[0];
        if !value.is_finite() {
            return Ok(value);
        }
        g.backward(loss)?;
        let grads = collect_grads(&g, &cv.0);
        let refs: Vec<&Tensor> = grads.iter().collect();
        adam.step(&mut self.critic.flat_params_mut(), &refs)?;
        Ok(value)
    }

    fn generator_step(&mut self, adam: &mut Adam, batch: &Batch, rng: &mut impl Rng) -> Result<f64> {
        let mut g = Graph::new();
        let (fake, fwd) = self.soft_fake(&mut g, batch, rng)?;
        let cond = g.constant(batch.cond.clone());
        let x = g.concat_cols(&[fake, cond])?;
        let cv = self.critic_vars(&mut g, false);
        let (_, _, d) = critic_forward(&mut g, &cv, x)?;
        let md = g.mean(d)?;
        let mut loss = g.scale(md, -1.0)?;
        if let Some(ce) = condition_loss(&mut g, fwd.output, &self.layout, &batch.conds)? {
            loss = g.add(loss, ce)?;
        }
        let value = g.value(loss).data()[0];
        if !value.is_finite() {
            return Ok(value);
        }
        g.backward(loss)?;
        let grads = collect_grads(&g, &fwd.param_vars);
        let refs: Vec<&Tensor> = grads.iter().collect();
        adam.step(&mut self.generator.flat_params_mut(), &refs)?;
        self.generator.update_running(&fwd);
        Ok(value)
    }
}

/// Adversarial training with training-by-sampling.
///
/// Random draws per step happen in a fixed order: critic batch conditions
/// and rows, generator noise, Gumbel noise, interpolation weights; then the
/// generator batch conditions, noise and Gumbel noise.
pub fn train_gan(codecs: &Codecs, data: &TransformedTable, config: &GanConfig, seed: u64) -> Result<GanModel> {
    config.validate()?;
    if data.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let layout = build_layout(codecs)?;
    if &layout != data.layout() {
        return Err(Error::State("transformed table was built with different codecs".into()));
    }
    if layout.cond_width == 0 {
        return Err(Error::Config("conditional GAN needs at least one discrete column".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = GanModel::init(codecs, layout, config, data.sampler().tables().to_vec(), seed, &mut rng)?;
    let adam_config = AdamConfig::adversarial(config.learning_rate);
    let mut adam_g = Adam::new(adam_config, model.generator.params().iter().flatten());
    let mut adam_c = Adam::new(adam_config, model.critic.params().iter().flatten());
    let steps = (data.n_rows() / config.batch_size).max(1);
    for epoch in 0..config.epochs {
        let (mut sum_c, mut sum_g) = (0.0, 0.0);
        for step in 0..steps {
            let mut critic_loss = 0.0;
            for _ in 0..config.critic_steps {
                let batch = model.draw_batch(data, true, &mut rng)?;
                critic_loss = model.critic_step(&mut adam_c, &batch, &mut rng)?;
                if !critic_loss.is_finite() {
                    return Err(Error::Divergence { epoch, batch: step });
                }
            }
            let batch = model.draw_batch(data, false, &mut rng)?;
            let gen_loss = model.generator_step(&mut adam_g, &batch, &mut rng)?;
            if !gen_loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: step });
            }
            sum_c += critic_loss;
            sum_g += gen_loss;
        }
        model.history.push(EpochLoss {
            critic: sum_c / steps as f64,
            generator: sum_g / steps as f64,
        });
    }
    Ok(model)
}

fn critic_forward(g: &mut Graph, cv: &CriticVars, x: Var) -> Result<(Var, Var, Var)> {
    let [w1, b1, w2, b2, w3, b3] = cv.0;
    let z1 = g.dense(x, w1, b1)?;
    let a1 = g.leaky_relu(z1, CRITIC_SLOPE)?;
    let z2 = g.dense(a1, w2, b2)?;
    let a2 = g.leaky_relu(z2, CRITIC_SLOPE)?;
    let out = g.dense(a2, w3, b3)?;
    Ok((z1, z2, out))
}

/// `mean((||dD/dx||_2 - 1)^2)` at the interpolated points whose
/// pre-activations are `z1`, `z2`.
///
/// The critic is piecewise linear, so its input gradient is
/// `((W3^T ⊙ m2) W2^T ⊙ m1) W1^T` with the activation slopes `m1`, `m2`
/// fixed. Recording that product as an ordinary graph makes the penalty
/// differentiable in the weights without second-order tapes.
fn gradient_penalty(g: &mut Graph, cv: &CriticVars, z1: Var, z2: Var, b: usize) -> Result<Var> {
    let [w1, _, w2, _, w3, _] = cv.0;
    let slope = |v: f64| if v > 0.0 { 1.0 } else { CRITIC_SLOPE };
    let m1 = g.value(z1).map(slope);
    let m2 = g.value(z2).map(slope);
    let m1 = g.constant(m1);
    let m2 = g.constant(m2);
    let ones = g.constant(Tensor::filled(&[b, 1], 1.0));
    let w3t = g.transpose(w3)?;
    let g2 = g.matmul(ones, w3t)?;
    let g2 = g.mul(g2, m2)?;
    let w2t = g.transpose(w2)?;
    let g1 = g.matmul(g2, w2t)?;
    let g1 = g.mul(g1, m1)?;
    let w1t = g.transpose(w1)?;
    let gx = g.matmul(g1, w1t)?;
    let sq = g.mul(gx, gx)?;
    let ss = g.sum_cols(sq)?;
    let ss = g.add_scalar(ss, 1e-12)?;
    let norm = g.sqrt(ss)?;
    let dev = g.add_scalar(norm, -1.0)?;
    let dev2 = g.mul(dev, dev)?;
    Ok(g.mean(dev2)?)
}

/// Tanh on alpha slots, Gumbel-softmax on every one-hot span.
fn soft_heads(g: &mut Graph, out: Var, layout: &RowLayout, tau: f64, rng: &mut impl Rng) -> Result<Var> {
    let b = g.value(out).rows();
    let mut parts = Vec::with_capacity(2 * layout.spans.len());
    for span in &layout.spans {
        let (start, onehot) = match *span {
            Span::Continuous { start, n_modes, .. } => {
                let a = g.slice_cols(out, start, 1)?;
                parts.push(g.tanh(a)?);
                (start + 1, n_modes)
            }
            Span::Discrete { start, n_categories, .. } => (start, n_categories),
        };
        let logits = g.slice_cols(out, start, onehot)?;
        let noise: Vec<f64> = (0..b * onehot)
            .map(|_| {
                let u: f64 = rng.random::<f64>().max(1e-300);
                -(-u.ln()).ln()
            })
            .collect();
        let noise = g.constant(Tensor::new(vec![b, onehot], noise)?);
        let perturbed = g.add(logits, noise)?;
        let scaled = g.scale(perturbed, 1.0 / tau)?;
        parts.push(g.softmax(scaled)?);
    }
    Ok(g.concat_cols(&parts)?)
}

/// Cross-entropy of the raw logits of each row's conditioned span against
/// its condition, averaged over the batch.
fn condition_loss(g: &mut Graph, out: Var, layout: &RowLayout, conds: &[CondVector]) -> Result<Option<Var>> {
    let b = conds.len();
    let mut total: Option<Var> = None;
    for span in layout.discrete_spans() {
        let Span::Discrete {
            column,
            start,
            n_categories,
            ..
        } = *span
        else {
            continue;
        };
        let mut targets = vec![0.0; b * n_categories];
        let mut weights = vec![0.0; b];
        for (r, c) in conds.iter().enumerate() {
            if c.column == column {
                targets[r * n_categories + c.category] = 1.0;
                weights[r] = 1.0;
            }
        }
        if weights.iter().all(|&w| w == 0.0) {
            continue;
        }
        let logits = g.slice_cols(out, start, n_categories)?;
        let t = Tensor::new(vec![b, n_categories], targets)?;
        let ce = g.weighted_softmax_cross_entropy(logits, &t, &weights, b as f64)?;
        total = Some(match total {
            Some(acc) => g.add(acc, ce)?,
            None => ce,
        });
    }
    Ok(total)
}

fn harden(layout: &RowLayout, v: &mut [f64]) {
    for span in &layout.spans {
        let (start, len) = match *span {
            Span::Continuous { start, n_modes, .. } => {
                v[start] = v[start].tanh();
                (start + 1, n_modes)
            }
            Span::Discrete { start, n_categories, .. } => (start, n_categories),
        };
        let k = argmax_first(&v[start..start + len]);
        v[start..start + len].iter_mut().for_each(|x| *x = 0.0);
        v[start + k] = 1.0;
    }
}

fn join_cols(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, wa, wb) = (a.rows(), a.last_dim(), b.last_dim());
    let mut data = Vec::with_capacity(n * (wa + wb));
    for r in 0..n {
        data.extend_from_slice(a.row(r));
        data.extend_from_slice(b.row(r));
    }
    Tensor::new(vec![n, wa + wb], data).expect("consistent shape")
}

fn collect_grads(g: &Graph, vars: &[Var]) -> Vec<Tensor> {
    vars.iter()
        .map(|&v| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(g.value(v).shape())))
        .collect()
}
