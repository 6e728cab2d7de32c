//! Class balancing: random duplication of minority rows, or label-conditioned
//! CTGAN synthesis up to per-class targets.

use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctgan::GanModel;
use crate::data::{ClassLabel, FeatureTable};
use crate::error::{Error, Result};
use crate::hash::derive_seed;

pub type Targets = [usize; ClassLabel::COUNT];

/// Attack-class totals after GAN balancing in the reference experiment,
/// indexed like [`ClassLabel::ALL`]. Normal keeps its own count.
pub const REFERENCE_ATTACK_TARGETS: [(ClassLabel, usize); 4] = [
    (ClassLabel::DoS, 102_589),
    (ClassLabel::Probe, 41_149),
    (ClassLabel::U2R, 39_483),
    (ClassLabel::R2L, 55_350),
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    None,
    RandomOversample,
    Ctgan,
}

/// How per-class targets are derived from the input counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPreset {
    /// Every present class up to the majority count.
    #[default]
    Equalize,
    /// The reference attack-class totals; Normal untouched.
    #[serde(rename = "paper")]
    Reference,
}

impl TargetPreset {
    pub fn targets(self, counts: &Targets) -> Targets {
        match self {
            TargetPreset::Equalize => majority_targets(counts),
            TargetPreset::Reference => {
                let mut t = *counts;
                for (label, n) in REFERENCE_ATTACK_TARGETS {
                    t[label.index()] = n;
                }
                t
            }
        }
    }
}

/// What happens to original rows of a class whose count exceeds its target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeepPolicy {
    /// Keep every original row; a target below the current count is an error.
    #[default]
    RetainAll,
    /// Keep a uniform random subset of the originals of over-target classes.
    Subsample,
}

/// Majority count for every class that has rows; absent classes stay at 0
/// since there is nothing to duplicate or condition on.
pub fn majority_targets(counts: &Targets) -> Targets {
    let max = counts.iter().copied().max().unwrap_or(0);
    counts.map(|c| if c > 0 { max } else { 0 })
}

/// A balancing strategy with resolved per-class targets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancePlan {
    pub strategy: Strategy,
    pub targets: Option<Targets>,
    #[serde(default)]
    pub keep: KeepPolicy,
    pub seed: u64,
}

impl BalancePlan {
    pub fn none() -> Self {
        BalancePlan {
            strategy: Strategy::None,
            targets: None,
            keep: KeepPolicy::RetainAll,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.strategy, &self.targets) {
            (Strategy::None, Some(_)) => Err(Error::Plan("strategy none takes no targets".into())),
            (Strategy::RandomOversample | Strategy::Ctgan, None) => {
                Err(Error::Plan("oversampling strategies need targets".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Record written next to a balanced dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceManifest {
    pub strategy: Strategy,
    pub targets: Option<Targets>,
    pub keep: KeepPolicy,
    pub seed: u64,
    pub model_hash: Option<String>,
    pub input_counts: Targets,
    pub output_counts: Targets,
}

impl BalanceManifest {
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        serde_json::to_writer_pretty(&mut *w, self)?;
        writeln!(w)?;
        Ok(())
    }
}

fn check_targets(counts: &Targets, targets: &Targets, keep: KeepPolicy) -> Result<()> {
    for label in ClassLabel::ALL {
        let (c, t) = (counts[label.index()], targets[label.index()]);
        if t < c && keep == KeepPolicy::RetainAll {
            return Err(Error::Plan(format!(
                "target {t} for {label} is below its current count {c}"
            )));
        }
        if c == 0 && t > 0 {
            return Err(Error::Plan(format!("{label} has no rows to balance from")));
        }
    }
    Ok(())
}

/// Original rows kept under `keep`, in input order.
fn kept_rows(table: &FeatureTable, targets: &Targets, keep: KeepPolicy, rng: &mut impl Rng) -> Vec<usize> {
    let by_class = table.rows_by_class();
    let mut kept = Vec::with_capacity(table.n_rows());
    for label in ClassLabel::ALL {
        let rows = &by_class[label.index()];
        let t = targets[label.index()];
        if keep == KeepPolicy::Subsample && rows.len() > t {
            let mut pick: Vec<usize> = sample(rng, rows.len(), t).into_iter().map(|k| rows[k]).collect();
            pick.sort_unstable();
            kept.extend(pick);
        } else {
            kept.extend(rows);
        }
    }
    kept.sort_unstable();
    kept
}

/// Duplicates uniformly drawn rows of each class until it reaches its
/// target. Originals come first in input order, then the copies by class.
pub fn random_oversample(table: &FeatureTable, targets: &Targets, seed: u64) -> Result<FeatureTable> {
    let counts = table.class_counts();
    check_targets(&counts, targets, KeepPolicy::RetainAll)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = table.rows_by_class();
    let mut idx: Vec<usize> = (0..table.n_rows()).collect();
    for label in ClassLabel::ALL {
        let rows = &by_class[label.index()];
        for _ in rows.len()..targets[label.index()] {
            idx.push(rows[rng.random_range(0..rows.len())]);
        }
    }
    Ok(table.select_rows(&idx))
}

/// Appends label-conditioned synthetic rows until every class reaches its
/// target. Each class draws from its own RNG stream, so classes can be
/// generated concurrently with the same result.
pub fn ctgan_balance(
    table: &FeatureTable,
    model: &GanModel,
    targets: &Targets,
    keep: KeepPolicy,
    seed: u64,
) -> Result<FeatureTable> {
    if model.codecs().n_features() != table.n_cols() {
        return Err(Error::Shape(format!(
            "GAN models {} features, table has {}",
            model.codecs().n_features(),
            table.n_cols()
        )));
    }
    let counts = table.class_counts();
    check_targets(&counts, targets, keep)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "keep"));
    let mut out = table.select_rows(&kept_rows(table, targets, keep, &mut rng));
    let synthetic: Vec<Result<FeatureTable>> = ClassLabel::ALL
        .par_iter()
        .map(|&label| {
            let need = targets[label.index()].saturating_sub(counts[label.index()]);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, label.name()));
            if need == 0 {
                return Ok(table.empty_like());
            }
            model.generate_table(need, Some(label), table.columns(), &mut rng)
        })
        .collect();
    for part in synthetic {
        out.append(&part?)?;
    }
    Ok(out)
}

/// Applies `plan`, returning the balanced table and its manifest.
pub fn apply_plan(
    table: &FeatureTable,
    plan: &BalancePlan,
    model: Option<&GanModel>,
) -> Result<(FeatureTable, BalanceManifest)> {
    plan.validate()?;
    let (out, model_hash) = match (plan.strategy, plan.targets) {
        (Strategy::None, _) => (table.clone(), None),
        (Strategy::RandomOversample, Some(t)) => (random_oversample(table, &t, plan.seed)?, None),
        (Strategy::Ctgan, Some(t)) => {
            let model = model.ok_or_else(|| Error::Plan("ctgan balancing needs a trained model".into()))?;
            (ctgan_balance(table, model, &t, plan.keep, plan.seed)?, Some(model.content_hash()?))
        }
        _ => unreachable!("validated"),
    };
    let manifest = BalanceManifest {
        strategy: plan.strategy,
        targets: plan.targets,
        keep: plan.keep,
        seed: plan.seed,
        model_hash,
        input_counts: table.class_counts(),
        output_counts: out.class_counts(),
    };
    Ok((out, manifest))
}
