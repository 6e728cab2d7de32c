use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::TrainView;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            epochs: 50,
            learning_rate: 1e-3,
        }
    }
}

/// One-vs-rest linear classifiers minimizing
/// `||w||_1 + C * sum_i max(0, 1 - y_i (w.x_i + b))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    /// Per class `(w, b)`; `None` for classes absent from training.
    planes: Vec<Option<(Vec<f64>, f64)>>,
    /// Training frequency per class, the tie-break when decision values agree.
    class_counts: Vec<usize>,
}

/// The objective above for one binary problem with labels in {-1, +1}.
pub fn svm_objective(w: &[f64], b: f64, x: &[f64], y: &[f64], c: f64) -> f64 {
    let d = w.len();
    let hinge: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| {
            let f: f64 = w.iter().zip(&x[i * d..(i + 1) * d]).map(|(a, b)| a * b).sum::<f64>() + b;
            (1.0 - yi * f).max(0.0)
        })
        .sum();
    w.iter().map(|v| v.abs()).sum::<f64>() + c * hinge
}

/// Stochastic subgradient descent on the hinge term with a proximal
/// soft-threshold for the L1 term. The step size decays as `lr / epoch`.
pub fn train_binary(x: &[f64], d: usize, y: &[f64], params: &SvmParams, seed: u64) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // each sample step carries 1/n of the penalty
    let l1_share = 1.0 / n.max(1) as f64;
    for epoch in 1..=params.epochs {
        let lr = params.learning_rate / epoch as f64;
        order.shuffle(&mut rng);
        for &i in &order {
            let row = &x[i * d..(i + 1) * d];
            let f: f64 = w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>() + b;
            if y[i] * f < 1.0 {
                let step = lr * params.c * y[i];
                for (wj, v) in w.iter_mut().zip(row) {
                    *wj += step * v;
                }
                b += step;
            }
            let shrink = lr * l1_share;
            for wj in &mut w {
                *wj = wj.signum() * (wj.abs() - shrink).max(0.0);
            }
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch, batch: 0 });
        }
    }
    Ok((w, b))
}

impl LinearSvm {
    pub fn fit(data: TrainView<'_>, params: &SvmParams, seed: u64) -> Result<Self> {
        if params.c < 0.0 || params.learning_rate <= 0.0 {
            return Err(Error::Config("svm needs C >= 0 and a positive learning rate".into()));
        }
        let mut class_counts = vec![0; data.n_classes];
        for &c in data.y {
            class_counts[c] += 1;
        }
        let mut planes = Vec::with_capacity(data.n_classes);
        for (c, &count) in class_counts.iter().enumerate() {
            if count == 0 {
                planes.push(None);
                continue;
            }
            let y: Vec<f64> = data.y.iter().map(|&t| if t == c { 1.0 } else { -1.0 }).collect();
            planes.push(Some(train_binary(data.x, data.d, &y, params, seed.wrapping_add(c as u64))?));
        }
        Ok(LinearSvm { planes, class_counts })
    }

    pub fn plane(&self, class: usize) -> Option<(&[f64], f64)> {
        self.planes[class].as_ref().map(|(w, b)| (w.as_slice(), *b))
    }

    pub fn decision_row(&self, row: &[f64]) -> Vec<Option<f64>> {
        self.planes
            .iter()
            .map(|p| p.as_ref().map(|(w, b)| w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>() + b))
            .collect()
    }

    /// Softmax of the decision values over trained classes.
    pub fn scores_row(&self, row: &[f64]) -> Vec<f64> {
        let dec = self.decision_row(row);
        let max = dec.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = dec.iter().map(|v| v.map_or(0.0, |v| (v - max).exp())).collect();
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= s);
        out
    }

    /// Class order used to break ties: most frequent first, then lowest index.
    pub fn tie_priority(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.class_counts.len()).collect();
        order.sort_by_key(|&c| std::cmp::Reverse(self.class_counts[c]));
        order
    }
}
