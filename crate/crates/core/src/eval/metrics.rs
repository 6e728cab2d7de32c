use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when a denominator was zero and the metric was defined as 0.
    pub zero_division: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub zero_division: bool,
}

impl MetricReport {
    /// `key=value` lines, per-class keys suffixed with the class name.
    pub fn to_key_values(&self, names: &[&str]) -> String {
        let mut s = format!(
            "accuracy={}\nprecision={}\nrecall={}\nf1={}\nzero_division={}\n",
            self.accuracy, self.precision, self.recall, self.f1, self.zero_division
        );
        for (name, c) in names.iter().zip(&self.per_class) {
            s.push_str(&format!(
                "precision.{name}={}\nrecall.{name}={}\nf1.{name}={}\nsupport.{name}={}\n",
                c.precision, c.recall, c.f1, c.support
            ));
        }
        s
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Per-class one-vs-rest precision, recall and F1, averaged with weights equal
/// to each class's true support. Accuracy is trace over total.
pub fn weighted_metrics(m: &ConfusionMatrix) -> Result<MetricReport> {
    let total = m.total();
    if total == 0 {
        return Err(Error::Input("confusion matrix is empty".into()));
    }
    let mut per_class = Vec::with_capacity(m.n_classes());
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for c in 0..m.n_classes() {
        let (tp, fp, fne, _) = m.one_vs_rest(c);
        let (precision, zp) = ratio(tp, tp + fp);
        let (recall, zr) = ratio(tp, tp + fne);
        let (f1, zf) = if precision + recall > 0.0 {
            (2.0 * precision * recall / (precision + recall), false)
        } else {
            (0.0, true)
        };
        let support = tp + fne;
        let w = support as f64 / total as f64;
        wp += w * precision;
        wr += w * recall;
        wf += w * f1;
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
            // only classes that actually occur can make an average misleading
            zero_division: (zp || zr || zf) && support > 0,
        });
    }
    let zero_division = per_class.iter().any(|c| c.zero_division);
    Ok(MetricReport {
        accuracy: m.trace() as f64 / total as f64,
        precision: wp,
        recall: wr,
        f1: wf,
        per_class,
        zero_division,
    })
}
