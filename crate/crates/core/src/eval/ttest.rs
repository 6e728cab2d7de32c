use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance two-sample t-test with Welch-Satterthwaite
/// degrees of freedom. The two-sided p-value is `I_{df/(df+t^2)}(df/2, 1/2)`.
///
/// When both samples have zero variance the statistic is 0 (equal means,
/// p = 1) or infinite (p = 0).
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Input("each sample needs at least two values".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Input("samples must be finite".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            TTest { t: 0.0, df, p: 1.0 }
        } else {
            TTest {
                t: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
                df,
                p: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let x = df / (df + t * t);
    let p = if t == 0.0 { 1.0 } else { beta_reg(df / 2.0, 0.5, x) };
    Ok(TTest { t, df, p: p.clamp(0.0, 1.0) })
}

/// Welch test on two per-sample 0/1 correctness vectors from the same test set.
pub fn compare_experiments(a: &[bool], b: &[bool]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "correctness vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let fa: Vec<f64> = a.iter().map(|&c| c as u8 as f64).collect();
    let fb: Vec<f64> = b.iter().map(|&c| c as u8 as f64).collect();
    welch_ttest(&fa, &fb)
}
