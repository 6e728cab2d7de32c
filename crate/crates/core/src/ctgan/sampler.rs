use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layout::{RowLayout, Span};
use crate::error::{Error, Result};

/// Category counts of one discrete column of the training table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub column: usize,
    pub cond_start: usize,
    pub counts: Vec<usize>,
}

/// A one-hot condition over every discrete category slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CondVector {
    pub column: usize,
    pub category: usize,
    /// Position of the hot bit in the condition vector.
    pub slot: usize,
}

impl CondVector {
    pub fn mask(&self, cond_width: usize) -> Vec<f64> {
        let mut m = vec![0.0; cond_width];
        m[self.slot] = 1.0;
        m
    }
}

/// Training-by-sampling: a discrete column uniformly, then a category with
/// probability proportional to `ln(1 + count)`.
pub fn sample_condition(tables: &[FrequencyTable], rng: &mut impl Rng) -> Result<CondVector> {
    if tables.is_empty() {
        return Err(Error::Config("conditional sampling needs a discrete column".into()));
    }
    let t = &tables[rng.random_range(0..tables.len())];
    let weights = t.counts.iter().map(|&c| (c as f64).ln_1p());
    let dist = WeightedIndex::new(weights)
        .map_err(|e| Error::Config(format!("column {}: {e}", t.column)))?;
    let category = dist.sample(rng);
    Ok(CondVector {
        column: t.column,
        category,
        slot: t.cond_start + category,
    })
}

/// Frequency tables plus, per (column, category), the rows carrying it.
#[derive(Clone, Debug)]
pub struct CondSampler {
    tables: Vec<FrequencyTable>,
    rows: Vec<Vec<Vec<usize>>>,
    cumulative: Vec<WeightedIndex<f64>>,
}

impl CondSampler {
    /// Indexes `categories[i][k]`: the category of row `i` in the k-th
    /// discrete span of `layout`.
    pub fn new(layout: &RowLayout, categories: impl Iterator<Item = Vec<usize>>) -> Self {
        let spans: Vec<(usize, usize, usize)> = layout
            .discrete_spans()
            .map(|s| match *s {
                Span::Discrete {
                    column,
                    n_categories,
                    cond_start,
                    ..
                } => (column, n_categories, cond_start),
                Span::Continuous { .. } => unreachable!(),
            })
            .collect();
        let mut rows: Vec<Vec<Vec<usize>>> = spans.iter().map(|&(_, n, _)| vec![Vec::new(); n]).collect();
        for (i, cats) in categories.enumerate() {
            for (k, &c) in cats.iter().enumerate() {
                rows[k][c].push(i);
            }
        }
        let tables: Vec<FrequencyTable> = spans
            .iter()
            .zip(&rows)
            .map(|(&(column, _, cond_start), r)| FrequencyTable {
                column,
                cond_start,
                counts: r.iter().map(Vec::len).collect(),
            })
            .collect();
        let cumulative = frequency_index(&tables);
        CondSampler {
            tables,
            rows,
            cumulative,
        }
    }

    pub fn tables(&self) -> &[FrequencyTable] {
        &self.tables
    }

    pub fn sample_condition(&self, rng: &mut impl Rng) -> Result<CondVector> {
        sample_condition(&self.tables, rng)
    }

    /// Uniform draw among the rows matching `cond`.
    pub fn sample_conditioned_row(&self, cond: &CondVector, rng: &mut impl Rng) -> Result<usize> {
        let unsatisfiable = Error::ConditionUnsatisfiable {
            column: cond.column,
            category: cond.category,
        };
        let k = self
            .tables
            .iter()
            .position(|t| t.column == cond.column)
            .ok_or(unsatisfiable)?;
        match self.rows[k].get(cond.category) {
            Some(r) if !r.is_empty() => Ok(r[rng.random_range(0..r.len())]),
            _ => Err(Error::ConditionUnsatisfiable {
                column: cond.column,
                category: cond.category,
            }),
        }
    }

    /// Rows carrying `category` in `column`.
    pub fn candidates(&self, column: usize, category: usize) -> &[usize] {
        self.tables
            .iter()
            .position(|t| t.column == column)
            .and_then(|k| self.rows[k].get(category))
            .map_or(&[], Vec::as_slice)
    }

    /// A condition drawn from the empirical frequencies (column uniform),
    /// used for unconditioned generation.
    pub fn sample_original(&self, rng: &mut impl Rng) -> Result<CondVector> {
        original_condition(&self.tables, &self.cumulative, rng)
    }
}

pub(crate) fn original_condition(
    tables: &[FrequencyTable],
    cumulative: &[WeightedIndex<f64>],
    rng: &mut impl Rng,
) -> Result<CondVector> {
    if tables.is_empty() || cumulative.len() != tables.len() {
        return Err(Error::Config("conditional sampling needs a populated discrete column".into()));
    }
    let k = rng.random_range(0..tables.len());
    let category = cumulative[k].sample(rng);
    Ok(CondVector {
        column: tables[k].column,
        category,
        slot: tables[k].cond_start + category,
    })
}

pub(crate) fn frequency_index(tables: &[FrequencyTable]) -> Vec<WeightedIndex<f64>> {
    tables
        .iter()
        .filter_map(|t| WeightedIndex::new(t.counts.iter().map(|&c| c as f64)).ok())
        .collect()
}
