//! Per-column Gaussian mixtures and mode-specific normalization.
//!
//! A column is fitted by EM from k-means++ seeds for every mode count up to
//! `max_modes`; the count with the lowest BIC wins, then modes lighter than
//! the prune threshold are dropped and EM is rerun on the survivors.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub max_modes: usize,
    pub prune_threshold: f64,
    /// Lower bound on every mode's standard deviation.
    pub std_floor: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Columns longer than this are fitted on a seeded subsample.
    pub max_fit_samples: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            max_modes: 10,
            prune_threshold: 0.005,
            std_floor: 1e-4,
            max_iter: 300,
            tol: 1e-6,
            max_fit_samples: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnGmm {
    modes: Vec<Mode>,
    max_modes: usize,
}

/// A value expressed relative to one mode: `alpha = (v - mean) / (4 std)`,
/// clipped to `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeNormalized {
    pub alpha: f64,
    pub mode: usize,
}

impl ModeNormalized {
    pub fn onehot(&self, n_modes: usize) -> Vec<f64> {
        let mut v = vec![0.0; n_modes];
        v[self.mode] = 1.0;
        v
    }

    /// Recovers the mode index from an exact one-hot vector.
    pub fn from_onehot(alpha: f64, onehot: &[f64]) -> Result<Self> {
        let hot: Vec<usize> = onehot
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i)
            .collect();
        match (hot.as_slice(), onehot.iter().all(|&v| v == 0.0 || v == 1.0)) {
            ([k], true) => Ok(ModeNormalized { alpha, mode: *k }),
            _ => Err(Error::Input(format!("not a one-hot vector: {onehot:?}"))),
        }
    }
}

/// Log-likelihood after each EM iteration, one list per EM pass.
#[derive(Clone, Debug, Default)]
pub struct FitTrace {
    pub passes: Vec<Vec<f64>>,
}

impl ColumnGmm {
    pub fn from_modes(modes: Vec<Mode>, max_modes: usize) -> Result<Self> {
        if modes.is_empty() || modes.len() > max_modes.max(1) {
            return Err(Error::Input(format!("{} modes with max {max_modes}", modes.len())));
        }
        let total: f64 = modes.iter().map(|m| m.weight).sum();
        if modes.iter().any(|m| !(m.weight > 0.0 && m.std > 0.0 && m.mean.is_finite()))
            || (total - 1.0).abs() > 1e-9
        {
            return Err(Error::Input("mode weights must be positive and sum to 1".into()));
        }
        Ok(ColumnGmm { modes, max_modes })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn max_modes(&self) -> usize {
        self.max_modes
    }

    /// Posterior mode responsibilities for `value`.
    pub fn mode_probabilities(&self, value: f64) -> Vec<f64> {
        let mut logp: Vec<f64> = self
            .modes
            .iter()
            .map(|m| m.weight.ln() + log_normal(value, m.mean, m.std))
            .collect();
        let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for l in &mut logp {
            *l = (*l - max).exp();
            sum += *l;
        }
        logp.iter_mut().for_each(|l| *l /= sum);
        logp
    }

    /// Samples a mode from the responsibilities and normalizes against it.
    pub fn normalize(&self, value: f64, rng: &mut impl Rng) -> ModeNormalized {
        let probs = self.mode_probabilities(value);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut mode = probs.len() - 1;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                mode = k;
                break;
            }
        }
        self.normalize_with_mode(value, mode)
    }

    pub fn normalize_with_mode(&self, value: f64, mode: usize) -> ModeNormalized {
        let m = &self.modes[mode];
        let alpha = ((value - m.mean) / (4.0 * m.std)).clamp(-1.0, 1.0);
        ModeNormalized { alpha, mode }
    }

    pub fn denormalize(&self, v: ModeNormalized) -> Result<f64> {
        let m = self
            .modes
            .get(v.mode)
            .ok_or_else(|| Error::Input(format!("mode {} of {}", v.mode, self.modes.len())))?;
        Ok(v.alpha * 4.0 * m.std + m.mean)
    }

    /// Mean log-density of `values` under the mixture.
    pub fn mean_log_likelihood(&self, values: &[f64]) -> f64 {
        let n = values.len().max(1) as f64;
        values.iter().map(|&x| self.log_density(x)).sum::<f64>() / n
    }

    pub fn log_density(&self, x: f64) -> f64 {
        log_sum_exp(
            self.modes
                .iter()
                .map(|m| m.weight.ln() + log_normal(x, m.mean, m.std)),
        )
    }
}

fn log_normal(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * (LN_2PI + z * z) - std.ln()
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + it.map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn fit_column_gmm(values: &[f64], max_modes: usize, seed: u64) -> Result<ColumnGmm> {
    let config = GmmConfig {
        max_modes,
        ..GmmConfig::default()
    };
    fit_column_gmm_with(values, &config, seed).map(|(g, _)| g)
}

pub fn fit_column_gmm_with(values: &[f64], config: &GmmConfig, seed: u64) -> Result<(ColumnGmm, FitTrace)> {
    if values.is_empty() {
        return Err(Error::Input("cannot fit a mixture to an empty column".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("column contains non-finite values".into()));
    }
    if config.max_modes == 0 {
        return Err(Error::Config("max_modes must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample: Vec<f64> = if values.len() > config.max_fit_samples {
        let mut idx = index::sample(&mut rng, values.len(), config.max_fit_samples).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| values[i]).collect()
    } else {
        values.to_vec()
    };

    let mut distinct = sample.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let k_max = config.max_modes.min(distinct.len());
    let n = sample.len() as f64;

    let mut trace = FitTrace::default();
    let mut best: Option<(f64, Vec<Mode>, Vec<f64>)> = None;
    let mut since_best = 0;
    for k in 1..=k_max {
        let init = kmeans_pp_init(&sample, k, config.std_floor, &mut rng);
        let (modes, lls) = em(&sample, init, config);
        let ll = lls.last().copied().unwrap_or(f64::NEG_INFINITY) * n;
        let params = (3 * modes.len() - 1) as f64;
        let bic = -2.0 * ll + params * n.ln();
        if best.as_ref().is_none_or(|(b, _, _)| bic < *b) {
            best = Some((bic, modes, lls));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 2 {
                break;
            }
        }
    }
    let (_, mut modes, lls) = best.expect("at least one mode count tried");
    trace.passes.push(lls);

    let before = modes.len();
    modes.retain(|m| m.weight >= config.prune_threshold);
    if modes.len() < before {
        renormalize(&mut modes);
        let (refit, lls) = em(&sample, modes, config);
        modes = refit;
        trace.passes.push(lls);
    }
    renormalize(&mut modes);
    Ok((
        ColumnGmm {
            modes,
            max_modes: config.max_modes,
        },
        trace,
    ))
}

fn renormalize(modes: &mut [Mode]) {
    let total: f64 = modes.iter().map(|m| m.weight).sum();
    modes.iter_mut().for_each(|m| m.weight /= total);
}

fn kmeans_pp_init(x: &[f64], k: usize, std_floor: f64, rng: &mut impl Rng) -> Vec<Mode> {
    let mut centers = vec![x[rng.random_range(0..x.len())]];
    let mut d2: Vec<f64> = x.iter().map(|v| (v - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = x.len() - 1;
        for (i, d) in d2.iter().enumerate() {
            acc += d;
            if acc > target {
                pick = i;
                break;
            }
        }
        let c = x[pick];
        centers.push(c);
        for (d, v) in d2.iter_mut().zip(x) {
            *d = d.min((v - c).powi(2));
        }
    }

    // hard assignment to the nearest centre gives the starting moments
    let k = centers.len();
    let mut count = vec![0.0; k];
    let mut sum = vec![0.0; k];
    let mut sq = vec![0.0; k];
    for &v in x {
        let j = (0..k)
            .min_by(|&a, &b| (v - centers[a]).abs().total_cmp(&(v - centers[b]).abs()))
            .expect("k >= 1");
        count[j] += 1.0;
        sum[j] += v;
        sq[j] += v * v;
    }
    let n = x.len() as f64;
    let overall_mean = x.iter().sum::<f64>() / n;
    let overall_var = x.iter().map(|v| (v - overall_mean).powi(2)).sum::<f64>() / n;
    (0..k)
        .filter(|&j| count[j] > 0.0)
        .map(|j| {
            let mean = sum[j] / count[j];
            let var = if count[j] > 1.0 {
                (sq[j] / count[j] - mean * mean).max(0.0)
            } else {
                overall_var
            };
            Mode {
                weight: count[j] / n,
                mean,
                std: var.sqrt().max(std_floor),
            }
        })
        .collect()
}

/// Runs EM from `modes`; returns the fitted modes and the mean
/// log-likelihood of the parameters entering each iteration, plus the final one.
fn em(x: &[f64], mut modes: Vec<Mode>, config: &GmmConfig) -> (Vec<Mode>, Vec<f64>) {
    let n = x.len() as f64;
    let mut lls = Vec::new();
    let mut resp = vec![0.0; x.len() * modes.len()];
    for _ in 0..config.max_iter {
        let k = modes.len();
        resp.resize(x.len() * k, 0.0);
        let ll = e_step(x, &modes, &mut resp);
        if let Some(&prev) = lls.last() {
            let delta: f64 = ll - prev;
            lls.push(ll);
            if delta.abs() < config.tol {
                break;
            }
        } else {
            lls.push(ll);
        }
        modes = m_step(x, &resp, k, n, config.std_floor);
    }
    let k = modes.len();
    resp.resize(x.len() * k, 0.0);
    let ll = e_step(x, &modes, &mut resp);
    if lls.last() != Some(&ll) {
        lls.push(ll);
    }
    (modes, lls)
}

fn e_step(x: &[f64], modes: &[Mode], resp: &mut [f64]) -> f64 {
    let k = modes.len();
    let logw: Vec<f64> = modes.iter().map(|m| m.weight.ln()).collect();
    let mut total = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let r = &mut resp[i * k..(i + 1) * k];
        let mut max = f64::NEG_INFINITY;
        for (j, m) in modes.iter().enumerate() {
            r[j] = logw[j] + log_normal(v, m.mean, m.std);
            max = max.max(r[j]);
        }
        let mut s = 0.0;
        for rj in r.iter_mut() {
            *rj = (*rj - max).exp();
            s += *rj;
        }
        r.iter_mut().for_each(|rj| *rj /= s);
        total += max + s.ln();
    }
    total / x.len() as f64
}

fn m_step(x: &[f64], resp: &[f64], k: usize, n: f64, std_floor: f64) -> Vec<Mode> {
    let mut nk = vec![0.0; k];
    let mut sx = vec![0.0; k];
    for (i, &v) in x.iter().enumerate() {
        for j in 0..k {
            let r = resp[i * k + j];
            nk[j] += r;
            sx[j] += r * v;
        }
    }
    let means: Vec<f64> = (0..k).map(|j| if nk[j] > 0.0 { sx[j] / nk[j] } else { 0.0 }).collect();
    let mut sv = vec![0.0; k];
    for (i, &v) in x.iter().enumerate() {
        for j in 0..k {
            sv[j] += resp[i * k + j] * (v - means[j]).powi(2);
        }
    }
    // a component with no responsibility has zero weight and drops out
    // without changing the likelihood
    (0..k)
        .filter(|&j| nk[j] > 1e-300)
        .map(|j| Mode {
            weight: nk[j] / n,
            mean: means[j],
            std: (sv[j] / nk[j]).sqrt().max(std_floor),
        })
        .collect()
}
