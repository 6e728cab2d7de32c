use serde::{Deserialize, Serialize};

use super::tree::TrainView;
use crate::error::{Error, Result};

/// Multinomial naive Bayes over nonnegative pseudo-counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNb {
    /// `ln P(class)`, `None` for classes absent from training.
    log_prior: Vec<Option<f64>>,
    /// `ln theta[class][feature]`, row-major.
    log_theta: Vec<f64>,
    d: usize,
}

impl MultinomialNb {
    pub fn fit(data: TrainView<'_>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("smoothing alpha must be positive, got {alpha}")));
        }
        let (d, k) = (data.d, data.n_classes);
        let n = data.y.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut feature_sum = vec![0.0; k * d];
        let mut class_n = vec![0usize; k];
        for (i, &c) in data.y.iter().enumerate() {
            class_n[c] += 1;
            for j in 0..d {
                let v = data.x[i * d + j];
                if v < 0.0 || !v.is_finite() {
                    return Err(Error::InvalidValue {
                        row: i,
                        column: j,
                        message: format!("multinomial naive Bayes needs finite nonnegative features, got {v}"),
                    });
                }
                feature_sum[c * d + j] += v;
            }
        }
        let mut log_theta = vec![0.0; k * d];
        for c in 0..k {
            let row = &feature_sum[c * d..(c + 1) * d];
            let total: f64 = row.iter().sum::<f64>() + alpha * d as f64;
            for j in 0..d {
                log_theta[c * d + j] = ((row[j] + alpha) / total).ln();
            }
        }
        let log_prior = class_n
            .iter()
            .map(|&m| (m > 0).then(|| (m as f64 / n as f64).ln()))
            .collect();
        Ok(MultinomialNb { log_prior, log_theta, d })
    }

    /// Unnormalized log posterior per class; absent classes get `None`.
    pub fn joint_log_likelihood(&self, row: &[f64]) -> Vec<Option<f64>> {
        self.log_prior
            .iter()
            .enumerate()
            .map(|(c, lp)| {
                lp.map(|lp| {
                    lp + row
                        .iter()
                        .zip(&self.log_theta[c * self.d..(c + 1) * self.d])
                        .map(|(x, t)| x * t)
                        .sum::<f64>()
                })
            })
            .collect()
    }

    /// Posterior probabilities, zero for absent classes.
    pub fn scores_row(&self, row: &[f64]) -> Vec<f64> {
        let jll = self.joint_log_likelihood(row);
        let max = jll.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = jll.iter().map(|v| v.map_or(0.0, |v| (v - max).exp())).collect();
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= s);
        out
    }
}
