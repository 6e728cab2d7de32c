use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::label::ClassLabel;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Discrete,
    Continuous,
}

/// Alphabetical label encoding: categories get codes `1..=K` in sorted order,
/// anything unseen at fit time maps to [`LabelEncoding::UNSEEN`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEncoding {
    codes: BTreeMap<String, u32>,
}

impl LabelEncoding {
    pub const UNSEEN: u32 = 0;

    pub fn fit<'a>(values: impl IntoIterator<Item = &'a str>) -> Self {
        let distinct: std::collections::BTreeSet<&str> = values.into_iter().collect();
        let codes = distinct
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s.to_string(), i as u32 + 1))
            .collect();
        LabelEncoding { codes }
    }

    pub fn encode(&self, value: &str) -> u32 {
        self.codes.get(value).copied().unwrap_or(Self::UNSEEN)
    }

    pub fn decode(&self, code: u32) -> Option<&str> {
        // codes are contiguous and follow the map's sorted order
        if code == 0 {
            return None;
        }
        self.codes.keys().nth(code as usize - 1).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.codes.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<LabelEncoding>,
    /// Training-split L2 norm applied to this column, continuous only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2_norm: Option<f64>,
}

impl ColumnMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnMeta {
            name: name.into(),
            kind: ColumnKind::Continuous,
            encoding: None,
            l2_norm: None,
        }
    }

    pub fn discrete(name: impl Into<String>, encoding: LabelEncoding) -> Self {
        ColumnMeta {
            name: name.into(),
            kind: ColumnKind::Discrete,
            encoding: Some(encoding),
            l2_norm: None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.kind == ColumnKind::Discrete
    }
}

/// Row-major numeric table with per-column metadata and a class label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    columns: Vec<ColumnMeta>,
    data: Vec<f64>,
    labels: Vec<ClassLabel>,
}

impl FeatureTable {
    pub fn new(columns: Vec<ColumnMeta>, rows: Vec<Vec<f64>>, labels: Vec<ClassLabel>) -> Result<Self> {
        let d = columns.len();
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != d {
                return Err(Error::Shape(format!("row {i} has {} cells, expected {d}", r.len())));
            }
            data.extend(r);
        }
        Ok(FeatureTable {
            columns,
            data,
            labels,
        })
    }

    pub fn from_flat(columns: Vec<ColumnMeta>, data: Vec<f64>, labels: Vec<ClassLabel>) -> Result<Self> {
        if data.len() != columns.len() * labels.len() {
            return Err(Error::Shape(format!(
                "{} cells for {} columns × {} rows",
                data.len(),
                columns.len(),
                labels.len()
            )));
        }
        Ok(FeatureTable {
            columns,
            data,
            labels,
        })
    }

    pub fn empty_like(&self) -> Self {
        FeatureTable {
            columns: self.columns.clone(),
            data: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn columns_mut(&mut self) -> &mut [ColumnMeta] {
        &mut self.columns
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks() of an empty slice with d=0 would panic
        self.data.chunks(self.n_cols().max(1)).take(self.n_rows())
    }

    pub fn cell(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn set_cell(&mut self, row: usize, col: usize, value: f64) {
        let d = self.n_cols();
        self.data[row * d + col] = value;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn push_row(&mut self, row: &[f64], label: ClassLabel) -> Result<()> {
        if row.len() != self.n_cols() {
            return Err(Error::Shape(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.n_cols()
            )));
        }
        self.data.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut out = self.empty_like();
        out.data.reserve(idx.len() * self.n_cols());
        for &i in idx {
            out.data.extend_from_slice(self.row(i));
            out.labels.push(self.labels[i]);
        }
        out
    }

    /// Appends all rows of `other`, which must have the same column names.
    pub fn append(&mut self, other: &FeatureTable) -> Result<()> {
        let same = self.columns.len() == other.columns.len()
            && self.columns.iter().zip(&other.columns).all(|(a, b)| a.name == b.name);
        if !same {
            return Err(Error::Shape("appending a table with different columns".into()));
        }
        self.data.extend_from_slice(&other.data);
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }

    pub fn class_counts(&self) -> [usize; ClassLabel::COUNT] {
        let mut counts = [0; ClassLabel::COUNT];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// Indices of rows carrying each label, in row order.
    pub fn rows_by_class(&self) -> [Vec<usize>; ClassLabel::COUNT] {
        let mut out: [Vec<usize>; ClassLabel::COUNT] = Default::default();
        for (i, l) in self.labels.iter().enumerate() {
            out[l.index()].push(i);
        }
        out
    }
}

/// Per-class counts of a labeled table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: [usize; ClassLabel::COUNT],
}

impl ClassDistribution {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.counts[label.index()]
    }

    /// Percentages in class order; all zero for an empty table.
    pub fn percentages(&self) -> [f64; ClassLabel::COUNT] {
        let total = self.total();
        let mut out = [0.0; ClassLabel::COUNT];
        if total > 0 {
            for (o, c) in out.iter_mut().zip(self.counts) {
                *o = 100.0 * c as f64 / total as f64;
            }
        }
        out
    }
}

pub fn class_distribution(table: &FeatureTable) -> ClassDistribution {
    ClassDistribution {
        counts: table.class_counts(),
    }
}

pub fn class_distribution_of(labels: &[ClassLabel]) -> ClassDistribution {
    let mut counts = [0; ClassLabel::COUNT];
    for l in labels {
        counts[l.index()] += 1;
    }
    ClassDistribution { counts }
}
